import csv
import json

import numpy as np
import pytest

from conftest import write_csv
from impactnorm.cli import main
from impactnorm.ingest import FILENAMES, write_config
from impactnorm.records import ALL_SOURCES, DatasetConfig
from impactnorm.report import MHQ_COLUMNS, read_tsv, worker_count
from impactnorm.synth import SynthConfig, generate, write_synthetic


def synth_dir(path, **kw):
    kw.setdefault("n_units", 12)
    kw.setdefault("papers_per_unit", 60)
    write_synthetic(*generate(SynthConfig(**kw)), path)
    return path


@pytest.fixture
def archive(tmp_path):
    src = synth_dir(tmp_path / "raw", seed=3, group_odds_ratio={"policy": 3.0, "news": 1.5})
    out = tmp_path / "archive"
    assert main(["ingest", str(src), "--out", str(out)]) == 0
    return out


def test_ingest_writes_archive(archive):
    for name in FILENAMES.values():
        assert (archive / name).is_file()
    report = json.loads((archive / "ingest_report.json").read_text())
    assert report["rows_read"]["publications"] == 12 * 60
    manifest = json.loads((archive / "run_manifest.json").read_text())
    assert manifest["command"] == "ingest"
    assert len(manifest["inputs"]) >= 4


def test_ingest_missing_file(tmp_path, capsys):
    src = synth_dir(tmp_path / "raw", seed=1, n_units=2, papers_per_unit=5)
    (src / "links.csv").unlink()
    assert main(["ingest", str(src), "--out", str(tmp_path / "o")]) == 2
    assert str(src / "links.csv") in capsys.readouterr().err


def test_ingest_integrity_failure(input_dir, tmp_path, capsys):
    with open(input_dir / "links.csv", "a", newline="") as fh:
        csv.writer(fh).writerow(["ghost7", "U1", "output"])
    assert main(["ingest", str(input_dir), "--out", str(tmp_path / "o")]) == 2
    assert "ghost7" in capsys.readouterr().err


def test_ingest_fixture(input_dir, tmp_path):
    assert main(["ingest", str(input_dir), "--out", str(tmp_path / "o")]) == 0


def test_mhq_three_group(archive, tmp_path):
    out = tmp_path / "mhq"
    code = main(["mhq", str(archive), "--out", str(out)])
    rows = read_tsv(out / "mhq_report.tsv")
    assert len(rows) == 3 * 7
    assert list(rows[0]) == list(MHQ_COLUMNS)
    assert code == (0 if all(r["status"] == "ok" for r in rows) else 1)
    # policy carries the largest planted PCS enrichment
    assert rows[0]["metric"] == "policy"
    assert [r["group"] for r in rows[:3]] == ["PCS", "PRO", "PCS&PRO"]
    sidecar = json.loads((out / "mhq_report.json").read_text())
    assert len(sidecar) == 21 and sidecar[0]["metric"] == "policy"


def test_three_group_rows_sorted_by_difference(archive, tmp_path):
    out = tmp_path / "mhq"
    main(["mhq", str(archive), "--out", str(out)])
    rows = json.loads((out / "mhq_report.json").read_text())
    diffs = []
    for i in range(0, len(rows), 3):
        pcs, pro = rows[i]["mhq"], rows[i + 1]["mhq"]
        assert rows[i]["metric"] == rows[i + 1]["metric"] == rows[i + 2]["metric"]
        if pcs is not None and pro is not None:
            diffs.append(pcs - pro)
    assert diffs == sorted(diffs, reverse=True)


def test_all_zero_metric_is_partial(archive, tmp_path):
    path = archive / "mentions.csv"
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    write_csv(path, rows[0], [r for r in rows[1:] if r[1] != "blogs"])
    out = tmp_path / "mhq"
    assert main(["mhq", str(archive), "--out", str(out)]) == 1
    rows = read_tsv(out / "mhq_report.tsv")
    blogs = [r for r in rows if r["metric"] == "blogs"]
    assert len(blogs) == 3
    assert all(r["status"] == "degenerate-denominator" for r in blogs)
    assert all(r["mhq"] is None and r["ci_low"] is None for r in blogs)
    # undefined differences sort last
    assert rows[-1]["metric"] == "blogs"


def test_mhq_metrics_flag_and_per_unit(archive, tmp_path):
    out = tmp_path / "mhq"
    main(["mhq", str(archive), "--mode", "per-unit", "--metrics", "citations,twitter", "--out", str(out)])
    rows = read_tsv(out / "mhq_report.tsv")
    labels = {r["group"] for r in rows}
    assert {r["metric"] for r in rows} == {"citations", "twitter"}
    assert "U000/output" in labels and "U000/case_ref" in labels
    assert len(rows) == 2 * len(labels)


def test_bad_metric_is_fatal(archive, tmp_path):
    assert main(["mhq", str(archive), "--metrics", "myspace", "--out", str(tmp_path / "m")]) == 2


def test_unreadable_archive_is_fatal(tmp_path):
    assert main(["mhq", str(tmp_path / "nothing"), "--out", str(tmp_path / "m")]) == 2


def test_mhq_byte_identical_rerun(archive, tmp_path, monkeypatch):
    monkeypatch.setenv("IMPACTNORM_THREADS", "1")
    main(["mhq", str(archive), "--out", str(tmp_path / "a")])
    monkeypatch.setenv("IMPACTNORM_THREADS", "4")
    main(["mhq", str(archive), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "mhq_report.tsv").read_bytes() == (tmp_path / "b" / "mhq_report.tsv").read_bytes()
    assert (tmp_path / "a" / "mhq_report.json").read_bytes() == (tmp_path / "b" / "mhq_report.json").read_bytes()


def test_tsv_round_trip(archive, tmp_path):
    out = tmp_path / "mhq"
    main(["mhq", str(archive), "--out", str(out)])
    tsv = read_tsv(out / "mhq_report.tsv")
    full = json.loads((out / "mhq_report.json").read_text())
    for a, b in zip(tsv, full):
        for col in MHQ_COLUMNS:
            if isinstance(b[col], float):
                assert a[col] == pytest.approx(b[col], rel=1e-5)
            else:
                assert a[col] == b[col]


def test_correlate_grid(tmp_path):
    src = synth_dir(tmp_path / "raw", seed=8, n_units=40, papers_per_unit=300, score_noise_sd=0.02,
                    unit_log_odds_sd=0.6)
    archive = tmp_path / "archive"
    main(["ingest", str(src), "--out", str(archive)])
    out = tmp_path / "corr"
    assert main(["correlate", str(archive), "--out", str(out)]) in (0, 1)
    rows = read_tsv(out / "corr_report.tsv")
    assert len(rows) == 14
    assert {(r["metric"], r["dimension"]) for r in rows} == {
        (s.value, d) for s in ALL_SOURCES for d in ("output", "impact")}
    cit = next(r for r in rows if r["metric"] == "citations" and r["dimension"] == "output")
    assert cit["r_s"] > 0.9
    assert cit["ci_low"] < cit["r_s"] < cit["ci_high"]


def test_correlate_n_units_varies_with_coverage(tmp_path):
    src = synth_dir(tmp_path / "raw", seed=4, n_units=30, papers_per_unit=25)
    archive = tmp_path / "archive"
    main(["ingest", str(src), "--out", str(archive)])
    out = tmp_path / "corr"
    main(["correlate", str(archive), "--out", str(out)])
    rows = [r for r in read_tsv(out / "corr_report.tsv") if r["dimension"] == "output"]
    n = {r["metric"]: r["n_units"] for r in rows}
    assert n["citations"] == 30
    assert n["policy"] is None or n["policy"] < n["twitter"]
    assert len({v for v in n.values()}) > 1


def test_too_few_units_row_is_flagged(tmp_path):
    src = synth_dir(tmp_path / "raw", seed=2, n_units=3, papers_per_unit=40)
    archive = tmp_path / "archive"
    main(["ingest", str(src), "--out", str(archive)])
    out = tmp_path / "corr"
    assert main(["correlate", str(archive), "--out", str(out)]) == 1
    rows = read_tsv(out / "corr_report.tsv")
    assert len(rows) == 14
    assert all(r["status"] == "too-few-units" and r["r_s"] is None for r in rows)


def write_coeffs(path, rows):
    write_csv(path, ["study_id", "r", "n"], rows)
    return path


def meta_report(tmp_path, rows, *extra):
    path = write_coeffs(tmp_path / f"c{len(rows)}.csv", rows)
    out = tmp_path / f"meta{len(rows)}"
    assert main(["meta", str(path), "--out", str(out), *extra]) == 0
    return {r["mode"]: r for r in json.loads((out / "meta_report.json").read_text())}


def test_meta_single_row(tmp_path):
    res = meta_report(tmp_path, [["s1", 0.42, 120]])
    assert set(res) == {"all", "clustered"}
    assert res["all"]["r_pooled"] == pytest.approx(0.42, abs=1e-12)
    assert res["all"]["k"] == 1


def test_meta_duplicate_row_narrows_ci(tmp_path):
    one = meta_report(tmp_path, [["s1", 0.42, 120]], "--mode", "all")["all"]
    two = meta_report(tmp_path, [["s1", 0.42, 120], ["s2", 0.42, 120]], "--mode", "all")["all"]
    assert two["r_pooled"] == pytest.approx(one["r_pooled"], abs=1e-12)
    assert two["ci_high"] - two["ci_low"] < one["ci_high"] - one["ci_low"]


def test_meta_heterogeneous_studies(tmp_path):
    rng = np.random.default_rng(9)
    true_z = rng.normal(0.4, 0.3, size=9)
    rows = [[f"s{i}", round(float(np.tanh(z)), 4), 300] for i, z in enumerate(true_z)]
    res = meta_report(tmp_path, rows, "--mode", "all")["all"]
    assert res["k"] == 9
    assert res["tau_sq"] > 0


def test_meta_empty_input(tmp_path, capsys):
    path = write_coeffs(tmp_path / "empty.csv", [])
    assert main(["meta", str(path), "--out", str(tmp_path / "m")]) == 2
    assert "no coefficients" in capsys.readouterr().err


def test_meta_missing_file(tmp_path):
    assert main(["meta", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "m")]) == 2


def test_meta_config_level(tmp_path):
    cfg = tmp_path / "config.txt"
    write_config(DatasetConfig(ci_level=0.80), cfg)
    wide = meta_report(tmp_path, [["s1", 0.3, 50]], "--mode", "all")["all"]
    out = tmp_path / "narrow"
    main(["meta", str(tmp_path / "c1.csv"), "--mode", "all", "--config", str(cfg), "--out", str(out)])
    narrow = json.loads((out / "meta_report.json").read_text())[0]
    assert narrow["ci_high"] - narrow["ci_low"] < wide["ci_high"] - wide["ci_low"]


def test_synth_cli_deterministic(tmp_path):
    cfg = tmp_path / "synth.json"
    cfg.write_text(json.dumps({"n_units": 5, "papers_per_unit": 20}))
    for name in ("a", "b"):
        assert main(["synth", "--config", str(cfg), "--seed", "11", "--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted([*FILENAMES.values(), "ground_truth.json", "run_manifest.json"])
    for f in files:
        if f != "run_manifest.json":
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    truth = json.loads((tmp_path / "a" / "ground_truth.json").read_text())
    assert truth["config"]["seed"] == 11
    assert main(["ingest", str(tmp_path / "a"), "--out", str(tmp_path / "ing")]) == 0


def test_synth_bad_config(tmp_path):
    cfg = tmp_path / "synth.json"
    cfg.write_text(json.dumps({"n_units": 5, "colour": "red"}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_worker_count(monkeypatch):
    monkeypatch.setenv("IMPACTNORM_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("IMPACTNORM_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.delenv("IMPACTNORM_THREADS")
    assert worker_count() >= 1
    monkeypatch.setenv("IMPACTNORM_THREADS", "many")
    with pytest.raises(ValueError):
        worker_count()
