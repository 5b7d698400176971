import numpy as np

from TNZ_CORE.commands import TensorCommand, parse_ints
from TNZ_CORE.exceptions import TensorNetworkError
from tensors.models import DenseTensor

KINDS = ('identity', 'random', 'kron')


class Command(TensorCommand):
    help = "Write a dense tensor (identity, seeded random, or Kronecker product of random squares) to a container"

    def add_command_arguments(self, parser):
        parser.add_argument('--kind', choices=KINDS, required=True)
        parser.add_argument('--shape', required=True,
                            help='identity: n; random: dims; kron: sizes of the square factors')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--name', default='input')
        parser.add_argument('--out', required=True)
        parser.add_argument('--f32', action='store_true', help='Store 32-bit payloads')

    def run(self, **options):
        shape = parse_ints(options['shape'])
        if not shape or any(d < 1 for d in shape):
            raise TensorNetworkError(f"Invalid shape {options['shape']}", code='invalid_shape')
        rng = np.random.default_rng(self.seed(options['seed']))

        kind = options['kind']
        if kind == 'identity':
            if len(shape) != 1:
                raise TensorNetworkError("identity takes a single size", code='invalid_shape')
            data = np.eye(shape[0])
        elif kind == 'random':
            data = rng.standard_normal(shape)
        else:
            data = np.ones((1, 1))
            for size in shape:
                data = np.kron(data, rng.standard_normal((size, size)))

        labels = ('i', 'j') if data.ndim == 2 else tuple(f"k{n}" for n in range(data.ndim))
        tensor = DenseTensor.from_array(data, labels)
        self.save(options['out'], [self.entry(options['name'], 'dense', tensor)], f32=options['f32'])
        return [{'name': options['name'], 'kind': kind, 'shape': list(tensor.shape), 'norm': tensor.norm()}]
