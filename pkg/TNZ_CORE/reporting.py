import math

import numpy as np
from django.conf import settings
from rest_framework.renderers import JSONRenderer


def round_significant(value: float, digits: int) -> float:
    if value == 0 or not math.isfinite(value):
        return value
    return float(f"{value:.{digits}g}")


def clean(value, digits: int):
    """Plain JSON-ready data with floats rounded to ``digits`` significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return round_significant(float(value), digits)
    if isinstance(value, np.ndarray):
        return [clean(v, digits) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): clean(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v, digits) for v in value]
    return value


class ReportEnvelope:
    """
    Standardizes command output across the project:
    {
        "count": number of results,
        "results": [list of records],
        "errors": {code: [messages]}   (failures only)
    }
    """

    def __init__(self, digits: int = None):
        self.digits = settings.TNZ_REPORT_DIGITS if digits is None else digits

    def build(self, results, errors=None) -> dict:
        results = clean(list(results), self.digits)
        payload = {'count': len(results), 'results': results}
        if errors:
            payload['errors'] = clean(errors, self.digits)
        return payload

    def render(self, results, errors=None) -> str:
        return JSONRenderer().render(self.build(results, errors)).decode('utf-8')
