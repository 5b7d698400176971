from django.apps import AppConfig


class TensorsConfig(AppConfig):
    name = 'tensors'
