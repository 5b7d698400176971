import numpy as np
from django.conf import settings

from TNZ_CORE.commands import TensorCommand
from TNZ_CORE.exceptions import PlanError
from layers.models import Batch, MpoLinearLayer
from layers.services.forward import forward_network, naive_forward_cost, sequential_order
from networks.services.planner import STRATEGIES, plan_contraction


class Command(TensorCommand):
    help = "Plan the contraction of a stored network, or of a layer applied to a batch"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True, help='Container with a general network, MPO or layer')
        parser.add_argument('--name', help='Object to plan (default: the first plannable one)')
        parser.add_argument('--strategy', choices=[s for s in STRATEGIES if s != 'fixed'] + ['sequential'])
        parser.add_argument('--batch', type=int, default=1, help='Batch size for layer plans')
        parser.add_argument('--out', help='Write the plan to this container')

    def run(self, **options):
        container = self.load(options['input'])
        entry = container.get(options['name']) if options['name'] else container.first('general', 'mpo', 'layer')
        strategy = options['strategy'] or settings.TNZ_DEFAULT_STRATEGY

        record = {'name': entry.name, 'kind': entry.kind}
        if entry.kind == 'general':
            if strategy == 'sequential':
                raise PlanError("The 'sequential' order applies to layers only", code='unknown_strategy')
            net = entry.value
        else:
            layer = entry.value if entry.kind == 'layer' else MpoLinearLayer(entry.value)
            net = forward_network(Batch.from_array(np.zeros((options['batch'], layer.in_size))), layer)
            record['batch'] = options['batch']
            record['naive_flops'] = naive_forward_cost(layer, options['batch'])

        if strategy == 'sequential':
            plan = plan_contraction(net, 'fixed', sequential_order(len(net) - 1))
        else:
            plan = plan_contraction(net, strategy)
        record.update({
            'strategy': strategy,
            'est_flops': plan.est_flops,
            'steps': [[step.left, step.right, step.result] for step in plan.steps],
        })
        if options['out']:
            self.save(options['out'], [self.entry(f"{entry.name}_plan", 'plan', plan)])
        return [record]
