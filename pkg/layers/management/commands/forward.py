from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

from TNZ_CORE.commands import TensorCommand
from TNZ_CORE.exceptions import TensorNetworkError
from layers.models import Batch, MpoLinearLayer
from layers.services.forward import mpo_forward, naive_forward_cost, sequential_order
from networks.services.planner import STRATEGIES


def load_layer(command: TensorCommand, path: str, name=None) -> MpoLinearLayer:
    container = command.load(path)
    entry = container.get(name) if name else container.first('layer', 'mpo')
    if entry.kind == 'layer':
        return entry.value
    if entry.kind == 'mpo':
        return MpoLinearLayer(entry.value)
    raise TensorNetworkError(f"'{entry.name}' is a {entry.kind}, not a layer", code='not_a_layer')


class Command(TensorCommand):
    help = "Apply a stored layer to a batch of inputs with a planned contraction"

    def add_command_arguments(self, parser):
        parser.add_argument('--layer', required=True, help='Container with a layer or MPO')
        parser.add_argument('--name', help='Layer object name (default: the first one)')
        parser.add_argument('--input', required=True, help='Container with a dense (batch, features) input')
        parser.add_argument('--batch', type=int, help='Chunk size; chunks run on TNZ_CHUNK_WORKERS threads')
        parser.add_argument('--strategy', choices=[s for s in STRATEGIES if s != 'fixed'] + ['sequential'])
        parser.add_argument('--out', help='Write the output batch to this container')

    def run(self, **options):
        layer = load_layer(self, options['layer'], options['name'])
        source = self.load(options['input']).first('dense')
        x = Batch.from_array(source.value.data.reshape(-1, layer.in_size) if source.value.ndim == 1 else source.value.data)

        strategy = options['strategy'] or settings.TNZ_DEFAULT_STRATEGY
        order = None
        if strategy == 'sequential':
            strategy, order = 'fixed', sequential_order(layer.mpo.n_sites)

        chunk = options['batch'] or x.batch_size
        if chunk < 1:
            raise TensorNetworkError(f"--batch must be >= 1, got {chunk}", code='invalid_batch')
        chunks = [Batch.from_array(x.array[start:start + chunk]) for start in range(0, x.batch_size, chunk)]
        with ThreadPoolExecutor(max_workers=max(1, settings.TNZ_CHUNK_WORKERS)) as pool:
            outputs = list(pool.map(lambda part: mpo_forward(part, layer, strategy, order), chunks))

        y = np.concatenate([out.array for out, _ in outputs], axis=0)
        if options['out']:
            self.save(options['out'], [self.entry('output', 'dense', Batch.from_array(y).data)])
        return [{
            'batch_size': x.batch_size,
            'chunks': len(chunks),
            'strategy': options['strategy'] or settings.TNZ_DEFAULT_STRATEGY,
            'est_flops': sum(flops for _, flops in outputs),
            'naive_flops': sum(naive_forward_cost(layer, part.batch_size) for part in chunks),
            'output_norm': float(np.linalg.norm(y)),
        }]
