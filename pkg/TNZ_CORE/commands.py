"""
Shared plumbing of the management commands: output envelope, error-to-exit
code mapping and container I/O.
"""
import logging
import math
from pathlib import Path
from typing import List, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from TNZ_CORE.exceptions import ContainerError, TensorNetworkError
from TNZ_CORE.reporting import ReportEnvelope
from containers.models import Container, Entry
from containers.services.container import read_container, write_container

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_IO = 2


def parse_ints(text: Optional[str]) -> Optional[List[int]]:
    """'2,2,2,2' -> [2, 2, 2, 2]"""
    if text is None or text == '':
        return None
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise CommandError(f"Expected comma-separated integers, got '{text}'", returncode=EXIT_VALIDATION)


def parse_bond(text: Optional[str]):
    """Bond limit: an integer, or 'inf' / nothing for no limit."""
    if text is None or str(text).lower() in ('', 'inf', 'none'):
        return math.inf
    try:
        return int(text)
    except ValueError:
        raise CommandError(f"--max-bond must be an integer or 'inf', got '{text}'", returncode=EXIT_VALIDATION)


class TensorCommand(BaseCommand):
    """
    Base class of every command.

    Subclasses implement ``add_command_arguments`` and ``run``; ``run``
    returns the list of result records. Library errors become exit code 1,
    container and file errors exit code 2.
    """
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--format', choices=['json', 'text'], default='json', help='Output format')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, **options) -> list:
        raise NotImplementedError

    def format_text(self, results: list) -> str:
        lines = []
        for record in ReportEnvelope().build(results)['results']:
            if isinstance(record, dict):
                lines.append('  '.join(f"{key}={value}" for key, value in record.items()))
            else:
                lines.append(str(record))
        return '\n'.join(lines)

    def handle(self, *args, **options):
        self.options = options
        try:
            results = self.run(**options)
        except ContainerError as exc:
            self._fail(exc.code, str(exc), EXIT_IO, exc.errors)
        except OSError as exc:
            self._fail('io_error', str(exc), EXIT_IO)
        except TensorNetworkError as exc:
            self._fail(exc.code, str(exc), EXIT_VALIDATION)
        self.emit(results)

    def emit(self, results: list, errors=None):
        if self.options.get('format') == 'text':
            self.stdout.write(self.format_text(results))
        else:
            self.stdout.write(ReportEnvelope().render(results, errors))

    def _fail(self, code: str, message: str, returncode: int, details=None):
        errors = {code: [message]}
        if details:
            errors['details'] = details
        self.stdout.write(ReportEnvelope().render([], errors))
        raise CommandError(f"{code}: {message}", returncode=returncode)

    def fail_validation(self, results: list, message: str):
        """Report results together with a failure and exit with code 1."""
        self.emit(results, {'validation_failed': [message]})
        raise CommandError(message, returncode=EXIT_VALIDATION)

    # ==================== CONTAINERS ====================

    def load(self, path: str) -> Container:
        data = Path(path).read_bytes()
        container = read_container(data)
        logger.debug("loaded %s: %s", path, container.names)
        return container

    def save(self, path: str, entries, f32: bool = False, extra=None):
        container = entries if isinstance(entries, Container) else Container(tuple(entries), extra or {})
        Path(path).write_bytes(write_container(container, f32=f32))

    def seed(self, value) -> Optional[int]:
        return settings.TNZ_SEED if value is None else int(value)

    @staticmethod
    def entry(name: str, kind: str, value) -> Entry:
        return Entry(name, kind, value)
