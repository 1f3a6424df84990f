from django.apps import AppConfig


class StateEstimationConfig(AppConfig):
    name = 'state_estimation'
    verbose_name = 'Distributed state estimation'
