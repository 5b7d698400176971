from django.conf import settings

from TNZ_CORE.commands import TensorCommand
from containers.services.checks import entry_checks


class Command(TensorCommand):
    help = "Recompute the invariants of every object in a container and report pass/fail per check"

    def add_command_arguments(self, parser):
        parser.add_argument('--in', dest='input', required=True)
        parser.add_argument('--reference', help='Container of dense tensors to compare against, matched by name')
        parser.add_argument('--atol', type=float, help='Comparison tolerance (default: TNZ_VERIFY_ATOL)')

    def _reference_for(self, reference, name):
        if reference is None:
            return None
        if name in reference.names and reference.get(name).kind == 'dense':
            return reference.get(name).value
        dense = [entry for entry in reference.entries if entry.kind == 'dense']
        return dense[0].value if len(dense) == 1 else None

    def run(self, **options):
        container = self.load(options['input'])
        reference = self.load(options['reference']) if options['reference'] else None
        atol = settings.TNZ_VERIFY_ATOL if options['atol'] is None else options['atol']

        results = []
        for entry in container.entries:
            for check in entry_checks(entry, self._reference_for(reference, entry.name), atol):
                results.append(dict({'name': entry.name, 'kind': entry.kind}, **check.to_dict()))

        failed = [f"{r['name']}:{r['check']}" for r in results if not r['passed']]
        if failed:
            self.fail_validation(results, f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return results
