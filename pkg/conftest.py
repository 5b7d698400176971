"""
Shared pytest setup: Django settings for serializers and management
commands, and seeded random generators.
"""
import os
import sys

import django
import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'TNZ_CORE.settings')
django.setup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_rng():
    """Factory for generators with an explicit seed."""
    return np.random.default_rng
