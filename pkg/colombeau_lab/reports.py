"""
report.json and rates.csv for a finished run.
"""
import csv
import logging
import math
import os

import numpy as np
from rest_framework.renderers import JSONRenderer

from .geometry import Box
from .serializers import ReportSerializer

logger = logging.getLogger(__name__)

REPORT_FILENAME = "report.json"
RATES_FILENAME = "rates.csv"
RATES_HEADER = ("eps", "sup_value", "test_id")


def plain(value):
    """
    JSON-safe copy of ``value``: infinities become "inf"/"-inf", NaN becomes
    "nan", boxes become [lower, upper] and unknown objects their labels.
    """
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, Box):
        return [list(value.lower), list(value.upper)]
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if value is None or isinstance(value, str):
        return value
    return getattr(value, "label", None) or repr(value)


def verdict_data(verdict):
    return {
        "test": verdict.test,
        "status": verdict.status,
        "details": plain(verdict.details or {}),
        "reports": [plain(report.as_dict()) for report in verdict.reports],
    }


def report_data(report):
    data = {
        "name": report.name,
        "kind": report.kind,
        "status": report.status,
        "verdicts": [verdict_data(v) for v in report.verdicts],
        "config": plain(report.config or {}),
        "environment": plain(report.environment or {}),
        "timings": plain(report.timings or {}),
        "battery": plain(report.battery),
    }
    if report.errors:
        data["errors"] = report.error_display().splitlines()
    return data


def render_report(report):
    serializer = ReportSerializer(report_data(report))
    return JSONRenderer().render(serializer.data, renderer_context={"indent": 2})


def rate_rows(report):
    """
    (eps, sup_value, test_id) rows in verdict and sample order.
    """
    for verdict in report.verdicts:
        for order_report in verdict.reports:
            for eps, value in order_report.samples:
                yield "%.17g" % eps, "%.17g" % value, order_report.test_id


def write_report(report, out_dir):
    """
    Write report.json and rates.csv into ``out_dir``; returns both paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, REPORT_FILENAME)
    rates_path = os.path.join(out_dir, RATES_FILENAME)
    with open(report_path, "wb") as f:
        f.write(render_report(report))
    with open(rates_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RATES_HEADER)
        writer.writerows(rate_rows(report))
    logger.debug("Wrote %s and %s", report_path, rates_path)
    return report_path, rates_path
