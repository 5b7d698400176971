from django.apps import AppConfig


class DecompositionsConfig(AppConfig):
    name = 'decompositions'
