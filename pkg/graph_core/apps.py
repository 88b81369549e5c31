from django.apps import AppConfig


class GraphCoreConfig(AppConfig):
    name = 'graph_core'
