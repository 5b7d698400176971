import numpy as np

from TNZ_CORE.commands import TensorCommand, parse_ints
from TNZ_CORE.exceptions import GaugeError
from decompositions.services.chain import mpo_to_matrix, random_mpo
from layers.management.commands.forward import load_layer
from layers.models import Batch, MpoLinearLayer
from layers.services.compression import compression_report
from layers.services.forward import mpo_forward
from stacks.models import GaugeTransform
from stacks.services.gauge import apply_gauge, gauge_feature_maps
from stacks.services.stack import build_stack, intermediate_features

ATOL = 1e-9


def random_gauge(cut: int, dim: int, rng: np.random.Generator) -> GaugeTransform:
    """Well-conditioned random gauge: a Gaussian matrix shifted by dim * I."""
    return GaugeTransform.from_matrix(cut, rng.standard_normal((dim, dim)) + dim * np.eye(dim))


class Command(TensorCommand):
    help = "Apply random gauges to every bond of an MPO and check what must stay invariant"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', help='Container with an MPO (default: a random 3-site MPO)')
        parser.add_argument('--name')
        parser.add_argument('--cut', type=int, help='Gauge only this cut')
        parser.add_argument('--schedule', help='Stack schedule for the feature relation check')
        parser.add_argument('--seed', type=int)

    def run(self, **options):
        rng = np.random.default_rng(self.seed(options['seed']))
        if options['input']:
            mpo = load_layer(self, options['input'], options['name']).mpo
        else:
            mpo = random_mpo([2, 2, 2], [2, 2, 2], 3, rng.integers(2 ** 31))
        cuts = range(len(mpo.bond_dims)) if options['cut'] is None else [options['cut']]
        if not cuts:
            raise GaugeError("A single-site MPO has no bonds to gauge", code='invalid_cut')
        schedule = parse_ints(options['schedule'])

        dense = mpo_to_matrix(mpo).data
        x = rng.standard_normal((4, dense.shape[0]))
        y, _ = mpo_forward(Batch.from_array(x), MpoLinearLayer(mpo))
        stack = build_stack(mpo, schedule)
        features = intermediate_features(stack, x)

        results = []
        for cut in cuts:
            if cut < 0 or cut >= len(mpo.bond_dims):
                raise GaugeError(f"Cut {cut} out of range for a {mpo.n_sites}-site MPO", code='invalid_cut')
            g = random_gauge(cut, mpo.bond_dims[cut], rng)
            gauged = apply_gauge(mpo, g)
            y_gauged, _ = mpo_forward(Batch.from_array(x), MpoLinearLayer(gauged))
            gauged_features = intermediate_features(build_stack(gauged, schedule), x)
            maps = gauge_feature_maps(stack, g)
            results.append({
                'cut': cut,
                'dense_diff': float(np.max(np.abs(mpo_to_matrix(gauged).data - dense))),
                'forward_diff': float(np.max(np.abs(y_gauged.array - y.array))),
                'n_dense_equal': compression_report(gauged).n_params_dense == compression_report(mpo).n_params_dense,
                'feature_diff': max(
                    float(np.max(np.abs(f @ t - fg))) for f, t, fg in zip(features, maps, gauged_features)
                ),
            })

        failed = [
            r['cut'] for r in results
            if max(r['dense_diff'], r['forward_diff'], r['feature_diff']) > ATOL or not r['n_dense_equal']
        ]
        if failed:
            self.fail_validation(results, f"Gauge invariance violated on cuts {failed}")
        return results
