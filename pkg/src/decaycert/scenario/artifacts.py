import csv
import errno
import logging
import math
import os
import shutil
import textwrap
# noinspection PyProtectedMember
from timeit import default_timer as timer

import numpy as np
import simplejson as json
from jinja2 import Template

from decaycert.errors import ArtifactWriteError
from . import version

_logger = logging.getLogger(__name__)


def format_number(value):
    """Round-trip exact text for a float; identical inputs give identical bytes."""
    if value is None:
        return ""
    return "{:.17g}".format(float(value))


def _plain(value):
    """numpy scalars and arrays to plain Python values for the JSON summary."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


class ArtifactStore(object):
    """Writes the report, summary and CSV tables of one scenario run into its output directory.

    Every file is first written as `<name>.new` and then moved over `<name>`, so a crashed run never leaves a
    half written artifact behind.
    """
    _new_suffix = ".new"
    report_file = "report.txt"
    summary_file = "summary.json"

    _report_template = Template(textwrap.dedent("""\
        decaycert {{ version }} - scenario {{ name }} ({{ mode }})
        Verdict: {{ verdict }}
        {% if values %}

        Constants
        {% for key, value in values %}
          {{ "%-27s" | format(key) }}: {{ value }}
        {% endfor %}
        {% endif %}

        Checked inequalities
        {% for line in check_lines %}
          {{ line }}
        {% else %}
          none
        {% endfor %}
        {% if stage_lines %}

        Stages
        {% for line in stage_lines %}
          {{ line }}
        {% endfor %}
        {% endif %}
        {% if notes %}

        Notes
        {% for note in notes %}
          {{ note }}
        {% endfor %}
        {% endif %}
        {% if tables %}

        Tables
        {% for table in tables %}
          {{ table }}
        {% endfor %}
        {% endif %}
        """), trim_blocks=True, lstrip_blocks=True)

    def __init__(self, location):
        self._location = location

    @property
    def location(self):
        return self._location

    def _ensure_location_exists(self):
        if not os.path.exists(self._location):
            try:
                os.makedirs(self._location)
            except OSError as exception:
                if exception.errno != errno.EEXIST:
                    raise

    def _swap(self, file_name):
        # a rename within one directory never leaves the target half written
        shutil.move(os.path.join(self._location, file_name + self._new_suffix),
                    os.path.join(self._location, file_name))

    def _write(self, file_name, writer):
        start = timer()
        try:
            self._ensure_location_exists()
            with open(os.path.join(self._location, file_name + self._new_suffix), "w", newline="") as f:
                writer(f)
            self._swap(file_name)
        except (IOError, OSError) as e:
            _logger.error("Failed to write {0}: {1}".format(file_name, e))
            raise ArtifactWriteError("Could not write {0}: {1}".format(
                os.path.join(self._location, file_name), e))
        _logger.debug("Wrote {0} ({1:.3f} seconds).".format(file_name, timer() - start))
        return os.path.join(self._location, file_name)

    def write_csv(self, file_name, header, rows):
        """Writes a table of numbers; None becomes an empty cell."""
        def writer(f):
            out = csv.writer(f, lineterminator="\n")
            out.writerow(header)
            for row in rows:
                out.writerow([format_number(v) for v in row])
        return self._write(file_name, writer)

    def write_report(self, scenario, outcome):
        check_lines = ["[{0}] {1}: {2} (slack {3:.6g})".format("PASS" if c.passed else "FAIL", c.tag, c.statement,
                                                               c.slack) for c in outcome.checks]
        stage_lines = ["[{0}] {1}: {2}".format("PASS" if s.passed else "FAIL", s.name, s.detail)
                       for s in outcome.stages]
        text = self._report_template.render(
            version=version.__version__, name=scenario.name, mode=scenario.mode, verdict=outcome.verdict,
            values=[(key, _display(value)) for key, value in outcome.values.items()], check_lines=check_lines,
            stage_lines=stage_lines, notes=outcome.notes, tables=sorted(outcome.tables))
        return self._write(self.report_file, lambda f: f.write(text.rstrip("\n") + "\n"))

    def write_summary(self, scenario, outcome):
        summary = {
            "name": scenario.name,
            "mode": str(scenario.mode),
            "version": version.__version__,
            "passed": outcome.passed,
            "verdict": outcome.verdict,
            "values": outcome.values,
            "checks": [{"tag": c.tag, "statement": c.statement, "slack": c.slack, "passed": c.passed}
                       for c in outcome.checks],
            "stages": [{"name": s.name, "passed": s.passed, "detail": s.detail} for s in outcome.stages],
            "notes": outcome.notes,
            "tables": sorted(outcome.tables),
        }
        text = json.dumps(_plain(summary), indent=2, sort_keys=True)
        return self._write(self.summary_file, lambda f: f.write(text + "\n"))

    def write_all(self, scenario, outcome):
        """CSV tables first, report and summary last: a report on disk means its tables are complete."""
        for file_name, (header, rows) in sorted(outcome.tables.items()):
            self.write_csv(file_name, header, rows)
        self.write_summary(scenario, outcome)
        return self.write_report(scenario, outcome)


def _display(value):
    if isinstance(value, (float, np.floating)):
        return "{:.12g}".format(float(value))
    return value
