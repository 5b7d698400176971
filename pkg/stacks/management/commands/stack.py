from TNZ_CORE.commands import TensorCommand, parse_ints
from layers.management.commands.forward import load_layer
from stacks.services.stack import build_stack


class Command(TensorCommand):
    help = "Export the stack of sparse fully-connected layers equivalent to an MPO"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True, help='Container with an MPO or layer')
        parser.add_argument('--name')
        parser.add_argument('--schedule', help='Stage index of each site, e.g. 1,0,2,3 (default: chain order)')
        parser.add_argument('--out', help='Write the stack to this container')

    def run(self, **options):
        layer = load_layer(self, options['input'], options['name'])
        stack = build_stack(layer.mpo, parse_ints(options['schedule']))
        if options['out']:
            self.save(options['out'], [self.entry('stack', 'stack', stack)])

        results = []
        for t, stage in enumerate(stack.layers):
            results.append({
                'stage': t,
                'site': stage.site,
                'legs_in': '.'.join(stack.stage_labels[t]),
                'legs_out': '.'.join(stack.stage_labels[t + 1]),
                'in_size': stage.in_size,
                'out_size': stage.out_size,
                'site_matrix': list(stage.site_matrix.shape),
                'identity': [stage.left_size, stage.right_size],
            })
        return results

    def format_text(self, results: list) -> str:
        lines = []
        for r in results:
            lines.append(
                f"stage {r['stage']}: site {r['site']}  [{r['legs_in']}] -> [{r['legs_out']}]  "
                f"I_{r['identity'][0]} x {r['site_matrix'][0]}x{r['site_matrix'][1]} x I_{r['identity'][1]}  "
                f"({r['in_size']} -> {r['out_size']})"
            )
        return '\n'.join(lines)
