from django.apps import AppConfig


class TensorizedConfig(AppConfig):
    name = 'tensorized'
