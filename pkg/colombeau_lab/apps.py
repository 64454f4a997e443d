from django.apps import AppConfig


class ColombeauLabConfig(AppConfig):
    name = "colombeau_lab"
    verbose_name = "Colombeau lab"
