import logging

from TNZ_CORE.commands import TensorCommand, parse_bond
from TNZ_CORE.exceptions import TensorizedPassError
from tensorized.models import ACTIVATION_KINDS, APPLICATIONS, ActivationSpec, PassTrace
from tensorized.services.pipeline import tensorize_input, tensorized_forward

logger = logging.getLogger(__name__)


class Command(TensorCommand):
    help = "Run a stack of MPO layers on an MPS input without leaving MPS form"

    def add_command_arguments(self, parser):
        parser.add_argument('--layers', required=True, help='Container whose MPO/layer objects run in stored order')
        parser.add_argument('--input', required=True, help='Container with an MPS, or a dense vector to tensorize')
        parser.add_argument('--max-bond', default=None)
        parser.add_argument('--tol', type=float, default=0.0)
        parser.add_argument('--activation', choices=ACTIVATION_KINDS, default='identity',
                            help='Applied after every layer but the last')
        parser.add_argument('--application', choices=APPLICATIONS, default='dense-oracle')
        parser.add_argument('--out', help='Write the output MPS and the pass trace to this container')

    def run(self, **options):
        mpos = [
            entry.value.mpo if entry.kind == 'layer' else entry.value
            for entry in self.load(options['layers']).entries
            if entry.kind in ('mpo', 'layer')
        ]
        if not mpos:
            raise TensorizedPassError(f"{options['layers']} holds no MPO layers", code='no_layers')

        source = self.load(options['input']).first('mps', 'dense')
        x = source.value if source.kind == 'mps' else tensorize_input(source.value.data, mpos[0].in_dims)

        activation = ActivationSpec(options['activation'], options['application'])
        if activation.experimental:
            logger.warning("local %s activation does not equal the dense activation for more than one site",
                           activation.kind)
        specs = [activation] * (len(mpos) - 1) + [ActivationSpec('identity', options['application'])]
        output, trace = tensorized_forward(list(zip(mpos, specs)), x, parse_bond(options['max_bond']), options['tol'])

        if options['out']:
            self.save(options['out'], [self.entry('output', 'mps', output), self.entry('trace', 'trace', trace)])
        return trace.to_dicts()

    def format_text(self, results: list) -> str:
        return '\n'.join(PassTrace.from_dicts(results).to_lines())
