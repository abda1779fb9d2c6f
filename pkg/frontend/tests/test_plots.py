import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sco_lab_plots.render import FigureSpec, SchemaError, main, render


def write_ratefit(path, eps_to_m, label=None):
    eps = sorted(eps_to_m, reverse=True)
    x = np.log([1 / e for e in eps])
    y = np.log([eps_to_m[e] for e in eps])
    slope, intercept = np.polyfit(x, y, 1)
    data = {"points": [[e, eps_to_m[e]] for e in eps],
            "slope": float(slope), "intercept": float(intercept),
            "r_squared": 1.0}
    if label:
        data["label"] = label
    path.write_text(json.dumps(data))
    return data


def write_summary(path, per_m, experiment_id="exp", delta=0.25):
    path.write_text(json.dumps({"experiment_id": experiment_id,
                                "delta": delta, "per_m": per_m}))


def write_deviations(path, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "sup_deviation"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])


class TestRateFigure:
    def test_exact_power_law_annotation(self, tmp_path):
        write_ratefit(tmp_path / "fit.json", {e: 100 / e ** 2
                                              for e in (0.4, 0.2, 0.1, 0.05)})
        report = render(FigureSpec((str(tmp_path / "fit.json"),), "rate",
                                   str(tmp_path / "fig")))
        assert "slope = 2.00" in report.annotations
        assert (tmp_path / "fig.png").exists()
        assert (tmp_path / "fig.svg").exists()

    def test_displayed_slope_matches_json_to_two_decimals(self, tmp_path):
        data = write_ratefit(tmp_path / "fit.json",
                             {0.4: 700, 0.2: 2600, 0.1: 11500, 0.05: 40000})
        report = render(FigureSpec((str(tmp_path / "fit.json"),), "rate",
                                   str(tmp_path / "fig")))
        assert report.annotations[0] == f"slope = {data['slope']:.2f}"

    def test_two_series_overlay(self, tmp_path):
        write_ratefit(tmp_path / "a.json", {e: 100 / e ** 2 for e in (0.4, 0.2, 0.1)},
                      label="integer ERM")
        write_ratefit(tmp_path / "b.json", {e: 50 / e for e in (0.4, 0.2, 0.1)},
                      label="continuous ERM")
        report = render(FigureSpec((str(tmp_path / "a.json"),
                                    str(tmp_path / "b.json")), "rate",
                                   str(tmp_path / "fig")))
        assert report.annotations == ("slope = 2.00", "slope = 1.00")

    def test_schema_error(self, tmp_path):
        (tmp_path / "bad.json").write_text(json.dumps({"slope": 2.0}))
        with pytest.raises(SchemaError):
            render(FigureSpec((str(tmp_path / "bad.json"),), "rate",
                              str(tmp_path / "fig")))


class TestSuccessCurve:
    def test_banded_points(self, tmp_path):
        per_m = [{"m": 10, "p_hat": 0.1, "ci_low": 0.05, "ci_high": 0.18,
                  "trials": 100, "successes": 10},
                 {"m": 100, "p_hat": 0.5, "ci_low": 0.4, "ci_high": 0.6,
                  "trials": 100, "successes": 50},
                 {"m": 1000, "p_hat": 0.95, "ci_low": 0.89, "ci_high": 0.98,
                  "trials": 100, "successes": 95}]
        write_summary(tmp_path / "summary.json", per_m)
        report = render(FigureSpec((str(tmp_path / "summary.json"),),
                                   "success-curve", str(tmp_path / "fig")))
        assert "exp" in report.annotations[0]
        assert (tmp_path / "fig.png").exists()

    def test_missing_column_is_error(self, tmp_path):
        write_summary(tmp_path / "s.json",
                      [{"m": 10, "p_hat": 0.5, "ci_low": 0.4}])
        with pytest.raises(SchemaError):
            render(FigureSpec((str(tmp_path / "s.json"),), "success-curve",
                              str(tmp_path / "fig")))


class TestDeviationHist:
    def test_median_marker(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.gamma(2.0, 1.0, size=400)
        write_deviations(tmp_path / "dev.csv", values)
        report = render(FigureSpec((str(tmp_path / "dev.csv"),),
                                   "deviation-hist", str(tmp_path / "fig")))
        med = float(np.median(values))
        assert report.annotations[0] == f"median = {med:.4g}"

    def test_empty_csv_is_error(self, tmp_path):
        (tmp_path / "dev.csv").write_text("trial,sup_deviation\n")
        with pytest.raises(SchemaError):
            render(FigureSpec((str(tmp_path / "dev.csv"),), "deviation-hist",
                              str(tmp_path / "fig")))


class TestByteDeterminism:
    @pytest.mark.parametrize("kind", ["rate", "success-curve", "deviation-hist"])
    def test_double_render_identical(self, tmp_path, kind):
        if kind == "rate":
            write_ratefit(tmp_path / "in.json", {e: 100 / e ** 2
                                                 for e in (0.4, 0.2, 0.1)})
            src = tmp_path / "in.json"
        elif kind == "success-curve":
            write_summary(tmp_path / "in.json",
                          [{"m": 10, "p_hat": 0.2, "ci_low": 0.1,
                            "ci_high": 0.3},
                           {"m": 100, "p_hat": 0.9, "ci_low": 0.8,
                            "ci_high": 0.95}])
            src = tmp_path / "in.json"
        else:
            write_deviations(tmp_path / "in.csv",
                             np.linspace(0.1, 3.0, 200))
            src = tmp_path / "in.csv"
        r1 = render(FigureSpec((str(src),), kind, str(tmp_path / "f1")))
        r2 = render(FigureSpec((str(src),), kind, str(tmp_path / "f2")))
        for a, b in ((r1.png_path, r2.png_path), (r1.svg_path, r2.svg_path)):
            assert open(a, "rb").read() == open(b, "rb").read()


class TestCli:
    def test_main_roundtrip(self, tmp_path, capsys):
        write_ratefit(tmp_path / "fit.json", {0.4: 625, 0.2: 2500, 0.1: 10000})
        code = main(["--in", str(tmp_path / "fit.json"), "--kind", "rate",
                     "--out", str(tmp_path / "fig"), "--title", "rates"])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].endswith("fig.png") and out[1].endswith("fig.svg")

    def test_schema_error_exit_2(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text("{}")
        code = main(["--in", str(tmp_path / "bad.json"), "--kind", "rate",
                     "--out", str(tmp_path / "fig")])
        assert code == 2


@pytest.mark.skipif(subprocess.run([sys.executable, "-c", "import sco_lab"],
                                   capture_output=True).returncode != 0,
                    reason="primary package not installed")
class TestEndToEndWithPrimary:
    """Secondary acceptance: rate figure built from real rate-separation
    artifacts displays the fitted slopes from the summary JSONs to two
    decimals, and rendering is byte-deterministic."""

    def test_plot_fidelity_from_rate_separation(self, tmp_path):
        from sco_lab.experiments import rate_fit_to_dict, rate_separation

        out = rate_separation(trials=300, master_seed=424242)
        fits = {}
        for key, label in (("integer", "integer ERM"),
                           ("continuous", "continuous ERM")):
            payload = rate_fit_to_dict(out[key]["fit"])
            payload["label"] = label
            fits[key] = payload
            (tmp_path / f"{key}.json").write_text(json.dumps(payload))
        spec = FigureSpec((str(tmp_path / "integer.json"),
                           str(tmp_path / "continuous.json")),
                          "rate", str(tmp_path / "fig"))
        r1 = render(spec)
        assert r1.annotations[0] == f"slope = {fits['integer']['slope']:.2f}"
        assert r1.annotations[1] == f"slope = {fits['continuous']['slope']:.2f}"
        spec2 = FigureSpec(spec.inputs, "rate", str(tmp_path / "fig2"))
        r2 = render(spec2)
        assert open(r1.png_path, "rb").read() == open(r2.png_path, "rb").read()
        assert open(r1.svg_path, "rb").read() == open(r2.svg_path, "rb").read()
