import json
import logging

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand, CommandError

from colombeau_lab.registry import get_experiment
from colombeau_lab.reports import write_report
from colombeau_lab.runner import ExperimentRunner
from colombeau_lab.utils import lab_setting

logger = logging.getLogger(__name__)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise CommandError("Cannot read %s: %s" % (path, e), returncode=1)
    except json.JSONDecodeError as e:
        raise CommandError("%s is not valid JSON: %s" % (path, e), returncode=1)


class Command(BaseCommand):
    help = "Run an experiment config (or a canonical experiment) and write report.json and rates.csv"

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", metavar="PATH", help="JSON experiment config")
        source.add_argument("--experiment", metavar="NAME", help="Canonical experiment, see colombeau_registry")
        parser.add_argument("--out", metavar="DIR", default="colombeau-out", help="Directory for the report files")
        parser.add_argument("--threads", type=int, default=None, help="Cap on sweep worker threads")
        parser.add_argument("--seed", type=int, default=None, help="Seed for sampled points")
        parser.add_argument("--eps-min", type=float, default=None, dest="eps_min")
        parser.add_argument("--eps-max", type=float, default=None, dest="eps_max")

    def handle(self, *args, **options):
        # COLOMBEAU_DEBUG only takes effect together with DEBUG.
        if settings.DEBUG and lab_setting("COLOMBEAU_DEBUG"):
            options["verbosity"] = 2

        if options["config"]:
            config = load_config(options["config"])
        else:
            try:
                config = get_experiment(options["experiment"])
            except ImproperlyConfigured as e:
                raise CommandError(str(e), returncode=1)

        runner = ExperimentRunner(
            config,
            threads=options["threads"],
            seed=options["seed"],
            eps_min=options["eps_min"],
            eps_max=options["eps_max"],
            verbosity=options["verbosity"],
        )
        report = runner.run()
        report_path, rates_path = write_report(report, options["out"])

        if report.status == "error":
            logger.error("Experiment %s could not run: %s", report.name, report.error_display())
            raise CommandError(report.error_display(), returncode=report.returncode)
        if report.status == "fail":
            logger.error("Experiment %s failed: %s", report.name, report.error_display())
            raise CommandError("%s FAIL. See %s" % (report.name, report_path), returncode=report.returncode)
        return "%s PASS (%d verdicts). Wrote %s and %s." % (report.name, len(report.verdicts), report_path, rates_path)
