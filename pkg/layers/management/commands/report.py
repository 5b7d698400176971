from TNZ_CORE.commands import TensorCommand
from TNZ_CORE.exceptions import TensorNetworkError
from layers.services.compression import compression_report


class Command(TensorCommand):
    help = "Print the compression report of every MPO and layer in a container"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True)

    def run(self, **options):
        results = []
        for entry in self.load(options['input']).entries:
            if entry.kind not in ('mpo', 'layer'):
                continue
            mpo = entry.value.mpo if entry.kind == 'layer' else entry.value
            results.append(dict({'name': entry.name, 'bond_dims': list(mpo.bond_dims)}, **compression_report(mpo).to_dict()))
        if not results:
            raise TensorNetworkError(f"{options['input']} holds no MPO or layer", code='not_a_layer')
        return results
