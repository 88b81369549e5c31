from django.apps import AppConfig


class AggregateConfig(AppConfig):
    name = 'aggregate'
