import numpy as np
import pytest

from clothtrack import fileio
from clothtrack.cli import main
from clothtrack.config import load_config

FAST_GA = "[ga]\npopulation = 8\ngenerations = 4\nparams = stretch_stiffness\n"


def config(tmp_path, body="", name="run.cfg"):
    path = tmp_path / name
    path.write_text("[meta]\nformat_version = 1\n" + body)
    return str(path)


def simulate(tmp_path, body="", out="sim", seed=None):
    args = ["simulate", "--config", config(tmp_path, body, f"{out}.cfg"), "--out",
            str(tmp_path / out)]
    if seed is not None:
        args += ["--seed", str(seed)]
    assert main(args) == 0
    return tmp_path / out


def test_simulate_default_translation(tmp_path, capsys):
    out = simulate(tmp_path)
    ids, uv = fileio.read_measurements(out / fileio.MEASUREMENTS)
    assert uv.shape == (30, 20, 2)
    assert not np.any(np.isnan(uv))
    line = capsys.readouterr().out.strip()
    assert "30 frames" in line and "20 features" in line and "noise 0.5" in line
    rigid, mesh = fileio.read_truth(out / fileio.TRUTH)
    assert rigid.shape == (30, 6) and mesh.shape == (30, 100, 3)
    forces = fileio.read_forces(out / fileio.FORCES, 100, 30)
    np.testing.assert_allclose(forces.sum(axis=1)[:, 1], 0.3)


def test_simulate_single_frame(tmp_path):
    out = simulate(tmp_path, "[scenario]\nframes = 1\n")
    _, uv = fileio.read_measurements(out / fileio.MEASUREMENTS)
    assert uv.shape == (1, 20, 2)
    assert main(["track", "--measurements", str(out / fileio.MEASUREMENTS),
                 "--out", str(tmp_path / "tr")]) == 0


def test_simulate_is_byte_identical(tmp_path):
    a = simulate(tmp_path, out="a", seed=2**64 - 1)
    b = simulate(tmp_path, out="b", seed=2**64 - 1)
    c = simulate(tmp_path, out="c", seed=5)
    for name in (fileio.MEASUREMENTS, fileio.TRUTH, fileio.FORCES):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / fileio.MEASUREMENTS).read_bytes() != (c / fileio.MEASUREMENTS).read_bytes()


@pytest.fixture(scope="module")
def translation_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("translation")
    return simulate(tmp)


def track(src, out, *extra):
    return main(["track", "--measurements", str(src / fileio.MEASUREMENTS), "--out", str(out),
                 *extra])


def test_track_outputs_round_trip(translation_dir, tmp_path):
    assert track(translation_dir, tmp_path, "--model", "rigid") == 0
    header, est = fileio.read_table(tmp_path / fileio.ESTIMATES)
    assert header == ["frame", "X", "Y", "theta", "vx", "vy", "omega", "dropped"]
    assert est.shape == (30, 8)
    header, res = fileio.read_table(tmp_path / fileio.RESIDUALS)
    assert header == ["frame", "avg_px", "worst_px"]
    assert np.mean(res[5:, 1]) <= 2.0
    assert np.all(res[:, 2] >= res[:, 1])
    header, fr = fileio.read_table(tmp_path / fileio.FEATURE_RESIDUALS)
    assert fr.shape == (600, 3)
    ids, pred = fileio.read_measurements(tmp_path / fileio.PREDICTIONS)
    assert pred.shape == (30, 20, 2)


def test_zero_force_ablation_is_worse(translation_dir, tmp_path):
    assert track(translation_dir, tmp_path / "true", "--force", "true") == 0
    assert track(translation_dir, tmp_path / "zero", "--force", "zero") == 0
    assert track(translation_dir, tmp_path / "none", "--model", "none") == 0
    mean = {k: fileio.read_table(tmp_path / k / fileio.RESIDUALS)[1][:, 1].mean()
            for k in ("true", "zero", "none")}
    assert mean["none"] > mean["zero"] >= mean["true"]


def test_mesh_model_and_explicit_forces(translation_dir, tmp_path):
    assert track(translation_dir, tmp_path, "--model", "mesh", "--forces",
                 str(translation_dir / fileio.FORCES)) == 0
    header, est = fileio.read_table(tmp_path / fileio.ESTIMATES)
    assert len(header) == 1 + 300 + 1


def test_open_loop_flag(translation_dir, tmp_path):
    assert track(translation_dir, tmp_path, "--open-loop") == 0


def test_report_recomputes_residuals(translation_dir, tmp_path, capsys):
    assert track(translation_dir, tmp_path / "tr") == 0
    capsys.readouterr()
    assert main(["report", "--measurements", str(translation_dir / fileio.MEASUREMENTS),
                 "--predictions", str(tmp_path / "tr" / fileio.PREDICTIONS),
                 "--out", str(tmp_path / "rep")]) == 0
    assert ((tmp_path / "rep" / fileio.RESIDUALS).read_text()
            == (tmp_path / "tr" / fileio.RESIDUALS).read_text())


def test_report_of_identical_files_is_zero(translation_dir, tmp_path, capsys):
    m = str(translation_dir / fileio.MEASUREMENTS)
    assert main(["report", "--measurements", m, "--predictions", m, "--out", str(tmp_path)]) == 0
    _, res = fileio.read_table(tmp_path / fileio.RESIDUALS)
    assert np.all(res[:, 1:] <= 1e-6)


def test_closed_loop_on_noiseless_data(tmp_path):
    body = "[scenario]\nnoise_sigma = 0.0\n[ekf]\nsubsteps = 100\nq_rigid = 0.0\nr_sigma = 0.001\n"
    src = simulate(tmp_path, body)
    assert main(["track", "--config", str(tmp_path / "sim.cfg"), "--measurements",
                 str(src / fileio.MEASUREMENTS), "--out", str(tmp_path / "tr")]) == 0
    _, res = fileio.read_table(tmp_path / "tr" / fileio.RESIDUALS)
    assert np.all(res[:, 1:] <= 1e-6)


def test_tune_outputs(translation_dir, tmp_path, capsys):
    cfg = config(tmp_path, FAST_GA)
    assert main(["tune", "--config", cfg, "--reference", str(translation_dir),
                 "--out", str(tmp_path / "t1"), "--seed", "4"]) == 0
    header, trace = fileio.read_table(tmp_path / "t1" / fileio.TRACE)
    assert header == ["generation", "best_fitness", "mean_fitness", "stretch_stiffness"]
    assert trace.shape == (5, 4)
    assert np.all(np.diff(trace[:, 1]) >= 0)
    header, top = fileio.read_table(tmp_path / "t1" / fileio.TOP_K)
    assert header[:2] == ["rank", "fitness"] and len(top) == 5
    best = load_config([tmp_path / "t1" / fileio.BEST_PARAMS]).cloth_params()
    assert best.stretch_stiffness == pytest.approx(top[0, 2])
    # same seed, same trace bytes
    assert main(["tune", "--config", cfg, "--reference", str(translation_dir),
                 "--out", str(tmp_path / "t2"), "--seed", "4"]) == 0
    assert ((tmp_path / "t1" / fileio.TRACE).read_bytes()
            == (tmp_path / "t2" / fileio.TRACE).read_bytes())


def test_tune_zero_generations(translation_dir, tmp_path):
    assert main(["tune", "--config", config(tmp_path, FAST_GA), "--reference",
                 str(translation_dir / fileio.MEASUREMENTS), "--generations", "0",
                 "--out", str(tmp_path)]) == 0
    _, trace = fileio.read_table(tmp_path / fileio.TRACE)
    assert trace.shape == (1, 4)


def test_tune_worst_weight_flag(translation_dir, tmp_path):
    cfg = config(tmp_path, FAST_GA)
    assert main(["tune", "--config", cfg, "--reference", str(translation_dir),
                 "--worst-weight", "0", "--generations", "0", "--out", str(tmp_path / "w0")]) == 0
    assert main(["tune", "--config", cfg, "--reference", str(translation_dir),
                 "--generations", "0", "--out", str(tmp_path / "w2")]) == 0
    f0 = fileio.read_table(tmp_path / "w0" / fileio.TRACE)[1][0, 1]
    f2 = fileio.read_table(tmp_path / "w2" / fileio.TRACE)[1][0, 1]
    assert f2 < f0 < 0


def test_tune_self_generated_reference(tmp_path):
    body = ("[scenario]\nkind = compression_tension\nnoise_sigma = 0.0\nsubsteps = 10\n"
            "[cloth]\nstretch_stiffness = 0.74\n[ga]\nparams = stretch_stiffness\n")
    src = simulate(tmp_path, body)
    assert main(["tune", "--config", str(tmp_path / "sim.cfg"), "--reference", str(src),
                 "--out", str(tmp_path / "tune")]) == 0
    _, trace = fileio.read_table(tmp_path / "tune" / fileio.TRACE)
    assert len(trace) == 101
    assert trace[-1, 1] >= -0.5


# exit codes


def test_exit_1_on_bad_arguments(capsys):
    with pytest.raises(SystemExit) as info:
        main(["track", "--model", "affine"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_exit_1_on_malformed_measurements(tmp_path, capsys):
    bad = tmp_path / "m.txt"
    bad.write_text("n_features 1\n0,0,320.0,240.0\n1,0,oops,240.0\n")
    assert main(["track", "--measurements", str(bad), "--model", "none",
                 "--out", str(tmp_path)]) == 1
    assert "m.txt:3" in capsys.readouterr().err


def test_exit_1_on_bad_config(tmp_path, capsys):
    assert main(["simulate", "--config", config(tmp_path, "[cloth]\nfoo = 1\n"),
                 "--out", str(tmp_path)]) == 1
    assert "foo" in capsys.readouterr().err


def test_exit_1_on_missing_forces(tmp_path, capsys):
    src = simulate(tmp_path)
    (src / fileio.FORCES).unlink()
    assert track(src, tmp_path / "tr") == 1
    assert main(["tune", "--config", config(tmp_path, FAST_GA), "--reference", str(src),
                 "--out", str(tmp_path / "t")]) == 1


def test_exit_1_on_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", "--out", str(blocker / "sub")]) == 1


def test_exit_2_on_numerical_failure(translation_dir, tmp_path, capsys):
    cfg = config(tmp_path, "[ekf]\nr_sigma = 1e-9\n")
    assert main(["track", "--config", cfg, "--measurements",
                 str(translation_dir / fileio.MEASUREMENTS), "--out", str(tmp_path)]) == 2
    assert "numerical" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "clothtrack", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
