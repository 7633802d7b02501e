import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mvlda.cli import main
from mvlda.covariance import EpochSet, covariance_from_matrices
from mvlda.discriminant import fit_means
from mvlda.io import ModelFile, load_model, save_model, write_bundle, write_epochs_csv
from mvlda.wavelet import CoefficientMask, WaveletConfig, dwt_inverse


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines() if "=" in line)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, parse_kv(out), err


def write_model(path, delta, s_l=None, s_r=None, **kw):
    k, j = delta.shape
    cov = covariance_from_matrices(np.eye(k) if s_l is None else s_l,
                                   np.eye(j) if s_r is None else s_r)
    model = fit_means(delta, np.zeros_like(delta), cov, 10, 10)
    save_model(ModelFile(model, cov.canonical(), **kw), path)
    return model


@pytest.fixture
def scalar_bundle(tmp_path, scalar_epochs):
    return write_bundle(scalar_epochs, tmp_path / "scalar.json")


def test_fit_scalar_bundle(tmp_path, capsys, scalar_bundle):
    code, kv, _ = run(capsys, "fit", scalar_bundle, "-o", tmp_path / "m.json")
    assert code == 0
    assert kv["Q"] == "1" and kv["converged"] == "true"
    assert float(kv["mahalanobis_total"]) == pytest.approx(100.0)
    assert "iterations" in kv and "fixed_point_residual" in kv
    assert load_model(tmp_path / "m.json").model.lam[0] == pytest.approx(100.0, rel=1e-13)


def test_fit_is_deterministic(tmp_path, capsys):
    run(capsys, "simulate", tmp_path / "b.json", "--K", 4, "--J", 3, "--seed", 1)
    run(capsys, "fit", tmp_path / "b.json", "-o", tmp_path / "m1.json")
    run(capsys, "fit", tmp_path / "b.json", "-o", tmp_path / "m2.json")
    assert (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_fit_numerical_failure_exit_code(tmp_path, capsys):
    epochs = EpochSet(np.array([1.0, 1.0, 5.0, 5.0]).reshape(4, 1, 1), [1, 1, 2, 2])
    write_bundle(epochs, tmp_path / "flat.json")
    code, _, err = run(capsys, "fit", tmp_path / "flat.json", "-o", tmp_path / "m.json")
    assert code == 2
    assert err.startswith("error: zero_within_class_scatter ")
    assert len(err.strip().splitlines()) == 1


def test_fit_validation_exit_code(tmp_path, capsys, scalar_bundle):
    (tmp_path / "scalar.f64").write_bytes(b"\0" * 24)
    code, _, err = run(capsys, "fit", scalar_bundle, "-o", tmp_path / "m.json")
    assert code == 1
    assert err.startswith("error: bundle_format payload size mismatch")


def test_scree_example(tmp_path, capsys):
    write_model(tmp_path / "m.json", np.diag([3.0, 2.0]))
    code, kv, _ = run(capsys, "scree", tmp_path / "m.json", tmp_path / "s.csv")
    assert code == 0
    header, rows = read_csv(tmp_path / "s.csv")
    assert header == ["q", "lambda", "cumulative_fraction", "elbow"]
    assert [int(r[0]) for r in rows] == [1, 2]
    assert float(rows[0][1]) == pytest.approx(9.0) and float(rows[1][1]) == pytest.approx(4.0)
    assert float(rows[0][2]) == pytest.approx(9 / 13) and float(rows[1][2]) == 1.0
    ET.parse(tmp_path / "s.svg")


def test_scree_empty_model(tmp_path, capsys):
    write_model(tmp_path / "m.json", np.zeros((2, 3)))
    code, kv, err = run(capsys, "scree", tmp_path / "m.json", tmp_path / "s.csv")
    assert code == 0 and kv["Q"] == "0"
    assert (tmp_path / "s.csv").read_text() == "q,lambda,cumulative_fraction,elbow\n"
    assert "warning" in err


def test_scree_elbow_on_planted_spectrum(tmp_path, capsys):
    run(capsys, "simulate", tmp_path / "b.json", "--K", 10, "--J", 12, "--n1", 200,
        "--n2", 200, "--lambdas", "40,30,20,15", "--seed", 4)
    run(capsys, "fit", tmp_path / "b.json", "-o", tmp_path / "m.json")
    code, kv, _ = run(capsys, "scree", tmp_path / "m.json", tmp_path / "s.csv")
    assert kv["elbow"] == "4"
    _, rows = read_csv(tmp_path / "s.csv")
    assert [r[3] for r in rows].index("1") == 3


def test_scree_unreadable_model(tmp_path, capsys):
    code, _, err = run(capsys, "scree", tmp_path / "nope.json", tmp_path / "s.csv")
    assert code == 1 and err.startswith("error: bundle_format")


def test_project_means_and_axes(tmp_path, capsys):
    run(capsys, "simulate", tmp_path / "b.json", "--K", 5, "--J", 4, "--n1", 300, "--n2", 300,
        "--lambdas", "36", "--seed", 2)
    run(capsys, "fit", tmp_path / "b.json", "-o", tmp_path / "m.json")
    mf = load_model(tmp_path / "m.json")
    code, kv, _ = run(capsys, "project", tmp_path / "m.json", tmp_path / "b.json",
                      tmp_path / "p.csv", "--axes", "1,2")
    assert code == 0
    for a in (1, 2):
        gap = float(kv[f"mean1_axis{a}"]) - float(kv[f"mean2_axis{a}"])
        assert gap == pytest.approx(np.sqrt(mf.model.lam[a - 1]), rel=1e-10)
    header, rows = read_csv(tmp_path / "p.csv")
    assert header == ["trial", "label", "score_axis1", "score_axis2"]
    assert len(rows) == 600
    labels = np.array([int(r[1]) for r in rows])
    s = np.array([float(r[2]) for r in rows])
    # planted Mahalanobis separation of 6 within-class standard deviations
    gap = s[labels == 1].mean() - s[labels == 2].mean()
    pooled = np.sqrt(0.5 * (s[labels == 1].var() + s[labels == 2].var()))
    assert gap > 3 * pooled
    ET.parse(tmp_path / "p.svg")


def test_project_axis_out_of_range(tmp_path, capsys, scalar_bundle):
    run(capsys, "fit", scalar_bundle, "-o", tmp_path / "m.json")
    code, _, err = run(capsys, "project", tmp_path / "m.json", scalar_bundle,
                       tmp_path / "p.csv", "--axes", "1,2")
    assert code == 1 and "Q=1" in err


def test_project_dimension_mismatch(tmp_path, capsys, scalar_bundle):
    write_model(tmp_path / "m.json", np.diag([3.0, 2.0]))
    code, _, err = run(capsys, "project", tmp_path / "m.json", scalar_bundle,
                       tmp_path / "p.csv")
    assert code == 1 and "error: invalid_input" in err


def test_components_col_single_direction(tmp_path, capsys):
    u1 = np.array([0.6, 0.8, 0.0])
    v1 = np.array([0.0, 0.0, 1.0, 0.0])
    model = write_model(tmp_path / "m.json", 5.0 * np.outer(u1, v1),
                        channel_names=("Fz", "Cz", "Pz", "Oz"))
    code, _, _ = run(capsys, "components", tmp_path / "m.json", tmp_path / "c.csv",
                     "--q", "1", "--domain", "col")
    assert code == 0 and model.Q == 1
    header, rows = read_csv(tmp_path / "c.csv")
    assert header == ["index", "name", "component1"]
    assert [r[1] for r in rows] == ["Fz", "Cz", "Pz", "Oz"]
    got = np.array([float(r[2]) for r in rows])
    # identity factors are rescaled to unit-norm S_R, which leaves the loading on Pz only
    np.testing.assert_allclose(got, np.sqrt(model.lam[0]) * model.v[:, 0], atol=1e-14)
    np.testing.assert_allclose(got / np.linalg.norm(got), v1, atol=1e-14)


def test_components_row_domain(tmp_path, capsys):
    rng = np.random.default_rng(0)
    model = write_model(tmp_path / "m.json", rng.standard_normal((4, 3)))
    run(capsys, "components", tmp_path / "m.json", tmp_path / "c.csv", "--domain", "row")
    header, rows = read_csv(tmp_path / "c.csv")
    assert header == ["index", "name", "component1", "component2", "component3"]
    vals = np.array([[float(x) for x in r[2:]] for r in rows])
    np.testing.assert_allclose(vals, model.u * np.sqrt(model.lam), rtol=1e-9, atol=1e-12)


def test_components_time_all_pass(tmp_path, capsys):
    config = WaveletConfig(4, 2, "zero-pad", 8)
    mask = CoefficientMask(8, np.arange(8), np.ones(8), 0.0)
    rng = np.random.default_rng(1)
    model = write_model(tmp_path / "m.json", rng.standard_normal((8, 3)), wavelet=config,
                        mask=mask, sample_rate_hz=1000.0, time_offset_ms=-100.0)
    code, _, _ = run(capsys, "components", tmp_path / "m.json", tmp_path / "t.csv",
                     "--domain", "time", "--q", "1,2,3")
    assert code == 0
    header, rows = read_csv(tmp_path / "t.csv")
    assert header == ["time_ms", "component1", "component2", "component3"]
    assert [float(r[0]) for r in rows] == [-100.0 + i for i in range(8)]
    vals = np.array([[float(x) for x in r[1:]] for r in rows])
    for q in range(3):
        expected = dwt_inverse(np.sqrt(model.lam[q]) * model.u[:, q], config)
        np.testing.assert_allclose(vals[:, q], expected, atol=1e-12)


def test_components_time_needs_wavelet(tmp_path, capsys):
    write_model(tmp_path / "m.json", np.diag([3.0, 2.0]))
    code, _, err = run(capsys, "components", tmp_path / "m.json", tmp_path / "t.csv",
                       "--domain", "time")
    assert code == 1 and "--wavelet" in err
    code, _, err = run(capsys, "components", tmp_path / "m.json", tmp_path / "t.csv",
                       "--q", "3")
    assert code == 1 and "Q=2" in err


def test_simulate_paper_dimensions(tmp_path, capsys):
    code, kv, _ = run(capsys, "simulate", tmp_path / "b.json", "--K", 28, "--J", 32,
                      "--n1", 120, "--n2", 600)
    assert code == 0 and kv["n"] == "720"
    assert (tmp_path / "b.f64").stat().st_size == 720 * 28 * 32 * 8


def test_simulate_deterministic_and_planted_scalar(tmp_path, capsys):
    args = ["--K", 1, "--J", 1, "--n1", 500, "--n2", 500, "--lambdas", "100", "--seed", 3]
    run(capsys, "simulate", tmp_path / "a.json", *args)
    run(capsys, "simulate", tmp_path / "b.json", *args)
    assert (tmp_path / "a.f64").read_bytes() == (tmp_path / "b.f64").read_bytes()
    a = (tmp_path / "a.json").read_text().replace('"a.f64"', '"X"')
    b = (tmp_path / "b.json").read_text().replace('"b.f64"', '"X"')
    assert a == b
    code, kv, _ = run(capsys, "fit", tmp_path / "a.json", "-o", tmp_path / "m.json")
    assert float(kv["mahalanobis_total"]) == pytest.approx(100.0, rel=0.15)


def test_simulate_factor_files(tmp_path, capsys):
    np.savetxt(tmp_path / "l.csv", np.diag([1.0, 2.0]), delimiter=",")
    np.savetxt(tmp_path / "r.csv", np.eye(3), delimiter=",")
    code, kv, _ = run(capsys, "simulate", tmp_path / "b.json", "--K", 2, "--J", 3,
                      "--sigma-row", tmp_path / "l.csv", "--sigma-col", tmp_path / "r.csv")
    assert code == 0
    code, _, err = run(capsys, "simulate", tmp_path / "b.json", "--K", 3, "--J", 3,
                       "--sigma-row", tmp_path / "l.csv")
    assert code == 1 and "do not match" in err


def test_convert_csv(tmp_path, capsys, scalar_epochs):
    write_epochs_csv(scalar_epochs, tmp_path / "e.csv")
    code, kv, _ = run(capsys, "convert", tmp_path / "e.csv", tmp_path / "e.json")
    assert code == 0 and kv["n"] == "4"
    code, kv, _ = run(capsys, "fit", tmp_path / "e.csv", "-o", tmp_path / "m.json")
    assert float(kv["mahalanobis_total"]) == pytest.approx(100.0)


def test_wavelet_pipeline_end_to_end(tmp_path, capsys):
    run(capsys, "simulate", tmp_path / "e.json", "--erp", "--J", 5, "--n1", 40, "--n2", 120,
        "--seed", 6)
    code, kv, _ = run(capsys, "fit", tmp_path / "e.json", "-o", tmp_path / "m.json",
                      "--wavelet", "--baseline-samples", 100)
    assert code == 0
    mf = load_model(tmp_path / "m.json")
    assert mf.wavelet.padded_length == 1024 and mf.mask.size == mf.model.K
    assert mf.time_offset_ms == -100.0
    code, kv, _ = run(capsys, "project", tmp_path / "m.json", tmp_path / "e.json",
                      tmp_path / "p.csv")
    assert code == 0 and kv["n"] == "160"
    code, _, _ = run(capsys, "components", tmp_path / "m.json", tmp_path / "t.csv",
                     "--domain", "time")
    header, rows = read_csv(tmp_path / "t.csv")
    assert len(rows) == 1024 and float(rows[0][0]) == -100.0
    ET.parse(tmp_path / "t.svg")


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "missing.json"])
    assert exc.value.code == 1
    last = capsys.readouterr().err.strip().splitlines()[-1]
    assert last.startswith("error: usage ") and "--out" in last
