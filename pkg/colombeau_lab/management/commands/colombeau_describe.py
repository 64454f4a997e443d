from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand, CommandError

from colombeau_lab.registry import get_experiment
from colombeau_lab.serializers import dump_config, normalize_config


class Command(BaseCommand):
    help = "Print the normalized config of a canonical experiment"

    def add_arguments(self, parser):
        parser.add_argument("name", help="Experiment name, see colombeau_registry")

    def handle(self, *args, **options):
        try:
            config = get_experiment(options["name"])
        except ImproperlyConfigured as e:
            raise CommandError(str(e), returncode=1)
        return dump_config(normalize_config(config))
