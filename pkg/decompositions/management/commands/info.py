from TNZ_CORE.commands import TensorCommand
from decompositions.services.entropy import cut_entropies, max_bond_entropy
from layers.services.compression import compression_report


def _chain_info(chain) -> dict:
    entropies = cut_entropies(chain)
    return {
        'sites': chain.n_sites,
        'bond_dims': list(chain.bond_dims),
        'entropies': entropies,
        'max_entropies': [max_bond_entropy(chi) for chi in chain.bond_dims],
        'n_params': chain.n_params,
    }


class Command(TensorCommand):
    help = "Describe the objects of a container: shapes, bond dims, cut entropies and compression"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True)

    def run(self, **options):
        container = self.load(options['input'])
        results = []
        for entry in container.entries:
            record = {'name': entry.name, 'kind': entry.kind}
            value = entry.value
            if entry.kind == 'dense':
                record.update(shape=list(value.shape), labels=list(value.labels), norm=value.norm())
            elif entry.kind == 'mps':
                record.update(_chain_info(value), dims=list(value.dims))
            elif entry.kind in ('mpo', 'layer'):
                mpo = value.mpo if entry.kind == 'layer' else value
                record.update(_chain_info(mpo), in_dims=list(mpo.in_dims), out_dims=list(mpo.out_dims))
                record['compression'] = compression_report(mpo).to_dict()
            elif entry.kind == 'tucker':
                record.update(shape=list(value.shape), ranks=list(value.ranks), n_params=value.n_params)
            elif entry.kind == 'cp':
                record.update(shape=list(value.shape), rank=value.rank, n_params=value.n_params)
            results.append(record)
        return results
