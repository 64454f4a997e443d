from django.core.management.base import BaseCommand

from colombeau_lab.registry import registry


class Command(BaseCommand):
    help = "List the canonical experiments"

    def handle(self, *args, **options):
        return "\n".join("%-16s %s" % (name, description) for name, description in registry())
