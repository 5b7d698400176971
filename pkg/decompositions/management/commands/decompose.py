import logging

from TNZ_CORE.commands import TensorCommand, parse_bond, parse_ints
from TNZ_CORE.exceptions import DecompositionError
from decompositions.services.chain import auto_factorize, matrix_to_mpo, vector_to_mps
from decompositions.services.kernels import cp_decompose, tucker_decompose
from tensors.models import DenseTensor

logger = logging.getLogger(__name__)


class Command(TensorCommand):
    help = "Decompose a dense tensor into an MPO, MPS, Tucker or CP form"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True)
        parser.add_argument('--out', required=True)
        parser.add_argument('--kind', choices=['mpo', 'mps', 'tucker', 'cp'], required=True)
        parser.add_argument('--name', help='Dense object to decompose (default: the first one)')
        parser.add_argument('--in-dims', help="Per-site input dims, or 'auto'")
        parser.add_argument('--out-dims', help="Per-site output dims, or 'auto'")
        parser.add_argument('--sites', type=int, help="Number of sites for 'auto' dims")
        parser.add_argument('--max-bond', default=None)
        parser.add_argument('--tol', type=float, default=0.0)
        parser.add_argument('--ranks', help='Tucker ranks x,y,w,h')
        parser.add_argument('--cp-rank', type=int)
        parser.add_argument('--max-iters', type=int, default=500)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--f32', action='store_true', help='Store 32-bit payloads')

    def _dims(self, text, size, sites):
        if text == 'auto':
            if not sites:
                raise DecompositionError("'auto' dims need --sites", code='missing_sites')
            return auto_factorize(size, sites)
        dims = parse_ints(text)
        if dims is None:
            raise DecompositionError("Site dims are required for chain decompositions", code='missing_dims')
        return dims

    def run(self, **options):
        container = self.load(options['input'])
        source = container.get(options['name']) if options['name'] else container.first('dense')
        t = source.value
        kind = options['kind']
        chi_max = parse_bond(options['max_bond'])

        if kind == 'mpo':
            if t.ndim != 2:
                raise DecompositionError(f"An MPO needs a matrix, got {t.ndim} indices", code='not_a_matrix')
            in_dims = self._dims(options['in_dims'], t.shape[0], options['sites'])
            out_dims = self._dims(options['out_dims'], t.shape[1], options['sites'] or len(in_dims))
            value = matrix_to_mpo(t, in_dims, out_dims, chi_max, options['tol'])
            summary = {'bond_dims': list(value.bond_dims), 'truncation_errors': list(value.truncation_errors)}
        elif kind == 'mps':
            vector = DenseTensor.from_array(t.flat, ('d',), ('output',))
            dims = self._dims(options['in_dims'], t.size, options['sites'])
            value = vector_to_mps(vector, dims, chi_max, options['tol'])
            summary = {'bond_dims': list(value.bond_dims), 'truncation_errors': list(value.truncation_errors)}
        elif kind == 'tucker':
            ranks = parse_ints(options['ranks'])
            value = tucker_decompose(t, ranks, None if ranks else options['tol'])
            summary = {'ranks': list(value.ranks)}
        else:
            if options['cp_rank'] is None:
                raise DecompositionError("--cp-rank is required for CP", code='invalid_rank')
            value = cp_decompose(t, options['cp_rank'], options['max_iters'], seed=self.seed(options['seed']))
            summary = {'rank': value.rank, 'weights': list(value.weights)}

        self.save(options['out'], [self.entry(source.name, kind, value)], f32=options['f32'])
        logger.info("decomposed '%s' as %s", source.name, kind)
        return [dict({'name': source.name, 'kind': kind, 'n_params': value.n_params}, **summary)]
