"""Output side of the runner: delimited files, figures, and a plain
text manifest tying results to the configuration that produced them.

CSV cells hold shortest-roundtrip float reprs written with fixed row
order and newline, so identical runs produce identical bytes.
"""

import csv
import os
import time

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def fmt(x):
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


class Check:
    """One threshold comparison: measured value against a config key."""

    def __init__(self, name, value, op, bound, key, passed):
        self.name = name
        self.value = value
        self.op = op
        self.bound = bound
        self.key = key
        self.passed = passed

    def render(self):
        state = "ok" if self.passed else "FAILED"
        return "%s = %s %s %s (%s) [%s]" % (
            self.name,
            fmt(self.value),
            self.op,
            fmt(self.bound),
            self.key,
            state,
        )


def check_le(name, value, bound, key):
    return Check(name, value, "<=", bound, key, value <= bound)


def check_ge(name, value, bound, key):
    return Check(name, value, ">=", bound, key, value >= bound)


def check_flag(name, passed, key):
    return Check(name, passed, "==", True, key, bool(passed))


class RunReporter:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.csv_files = []
        self.figures = []
        self.verdicts = []
        self.notes = []
        self.started = time.time()

    def write_csv(self, name, header, rows):
        path = os.path.join(self.out_dir, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(c) for c in row])
        self.csv_files.append(name)
        return path

    def save_figure(self, fig, name):
        path = os.path.join(self.out_dir, name)
        fig.savefig(path, dpi=120)
        plt.close(fig)
        self.figures.append(name)
        return path

    def add_verdict(self, subcommand, checks):
        self.verdicts.append((subcommand, all(c.passed for c in checks), checks))

    def note(self, text):
        self.notes.append(text)

    def all_passed(self):
        return all(ok for (_, ok, _) in self.verdicts)

    def write_manifest(self, config_lines, version, failed_error=None):
        lines = []
        lines.append("run manifest")
        lines.append("version: %s" % version)
        lines.append("wall_clock_seconds: %.2f" % (time.time() - self.started))
        lines.append("")
        lines.append("## configuration (resolved)")
        lines.extend(config_lines)
        lines.append("")
        lines.append("## outputs")
        for name in self.csv_files:
            lines.append("csv: %s" % name)
        for name in self.figures:
            lines.append("figure: %s" % name)
        lines.append("")
        lines.append("## verdicts")
        for sub, ok, checks in self.verdicts:
            lines.append("%s %s" % ("PASS" if ok else "FAIL", sub))
            for c in checks:
                lines.append("  " + c.render())
        for n in self.notes:
            lines.append("note: %s" % n)
        if failed_error is not None:
            lines.append("")
            lines.append("FAILED: %s" % failed_error)
        path = os.path.join(self.out_dir, "manifest.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        return path
