import logging

import numpy as np

from TNZ_CORE.commands import TensorCommand
from decompositions.services.chain import random_mpo
from layers.models import Batch, MpoLinearLayer
from layers.services.forward import dense_forward
from layers.services.training import train_mpo_regression

logger = logging.getLogger(__name__)

SITE_DIMS = [2, 2, 2, 2]
BOND_DIM = 2
N_SAMPLES = 64


class Command(TensorCommand):
    help = "Fit a bond-2 MPO layer to a target produced by another random bond-2 MPO"

    def add_command_arguments(self, parser):
        parser.add_argument('--seed', type=int)
        parser.add_argument('--lr', type=float, default=0.2)
        parser.add_argument('--epochs', type=int, default=2000)
        parser.add_argument('--out', help='Write the trained layer to this container')

    def run(self, **options):
        seed = self.seed(options['seed'])
        rng = np.random.default_rng(seed)
        target = MpoLinearLayer(random_mpo(SITE_DIMS, SITE_DIMS, BOND_DIM, rng.integers(2 ** 31)))
        student = MpoLinearLayer(random_mpo(SITE_DIMS, SITE_DIMS, BOND_DIM, rng.integers(2 ** 31)))

        x = Batch.from_array(rng.standard_normal((N_SAMPLES, target.in_size)))
        y = dense_forward(x, target)
        trained, losses = train_mpo_regression(x, y, student, options['lr'], options['epochs'], seed=seed)

        scale = float(np.mean(y.array ** 2))
        relative = [loss / scale for loss in losses]
        logger.info("train-demo: relative loss %.3e after %d epochs", relative[-1] if relative else 1.0, len(losses))
        if options['out']:
            self.save(options['out'], [self.entry('student', 'layer', trained)])
        return [{
            'epochs': len(losses),
            'initial_loss': losses[0] if losses else None,
            'final_loss': losses[-1] if losses else None,
            'final_relative_loss': relative[-1] if relative else None,
            'bond_dims': list(trained.mpo.bond_dims),
        }]
