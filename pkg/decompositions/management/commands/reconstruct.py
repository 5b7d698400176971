from TNZ_CORE.commands import TensorCommand
from TNZ_CORE.exceptions import DecompositionError
from decompositions.services.chain import mpo_to_matrix, mps_to_vector
from decompositions.services.kernels import cp_reconstruct, tucker_reconstruct

RECONSTRUCTORS = {
    'mpo': mpo_to_matrix,
    'layer': lambda layer: mpo_to_matrix(layer.mpo),
    'mps': mps_to_vector,
    'tucker': tucker_reconstruct,
    'cp': cp_reconstruct,
}


class Command(TensorCommand):
    help = "Contract every decomposed object of a container back into a dense tensor"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True)
        parser.add_argument('--out', required=True)
        parser.add_argument('--f32', action='store_true', help='Store 32-bit payloads')

    def run(self, **options):
        container = self.load(options['input'])
        entries, results = [], []
        for entry in container.entries:
            if entry.kind not in RECONSTRUCTORS:
                continue
            dense = RECONSTRUCTORS[entry.kind](entry.value)
            entries.append(self.entry(entry.name, 'dense', dense))
            results.append({'name': entry.name, 'from': entry.kind, 'shape': list(dense.shape), 'norm': dense.norm()})
        if not entries:
            raise DecompositionError(f"{options['input']} holds nothing to reconstruct", code='nothing_to_reconstruct')
        self.save(options['out'], entries, f32=options['f32'])
        return results
