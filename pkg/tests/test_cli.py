import pytest
import yaml

from ampf.cli import main

from conftest import CLI_CONFIG


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(CLI_CONFIG))
    return str(path)


def read_all(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.suffix in (".csv", ".json", ".yaml", ".svg")}


class TestCommands:
    def test_generate(self, tmp_path, config, capsys):
        out = tmp_path / "data.csv"
        assert main(["generate", "--config", config, "--out", str(out), "--duration", "40"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "timestamp,rate,cpu,mem,net" and len(lines) == 41
        assert (tmp_path / "data.meta.json").exists()

    def test_train_run_sweep_report(self, tmp_path, config):
        mdir = tmp_path / "model"
        assert main(["train", "--config", config, "--out", str(mdir)]) == 0
        assert (mdir / "model.npz").exists()
        assert (mdir / "training_report.csv").read_text().startswith("epoch,train_loss,validation_loss\n")

        rdir = tmp_path / "run"
        assert main(["run", "--config", config, "--model", str(mdir / "model.npz"), "--out", str(rdir),
                     "--horizons", "10"]) == 0
        ledger = (rdir / "ledger.csv").read_text().splitlines()
        assert ledger[0] == "metric,fetched,substituted,degraded,transmitted_fraction"
        for line in ledger[1:]:
            _, fetched, substituted, _, _ = line.split(",")
            assert int(fetched) + int(substituted) == 16 + 10 * 8
        assert (rdir / "decisions.csv").read_text().startswith("horizon_start,horizon_end,metric,nu,verdict")
        assert len((rdir / "reconstruction.csv").read_text().splitlines()) == 1 + 16 + 80

        sdir = tmp_path / "sweep"
        assert main(["sweep", "--config", config, "--model", str(mdir / "model.npz"), "--out", str(sdir)]) == 0
        assert len((sdir / "sweep.csv").read_text().splitlines()) == 1 + 2 * 3 * 4

        pdir = tmp_path / "report"
        assert main(["report", "--sweep", str(sdir / "sweep.csv"), "--out", str(pdir)]) == 0
        assert {p.name for p in pdir.iterdir()} == {"sweep.csv", "transmitted.svg", "smape.svg"}

    def test_hyperopt(self, tmp_path, config):
        out = tmp_path / "hp"
        assert main(["hyperopt", "--config", config, "--out", str(out)]) == 0
        assert len((out / "hyperopt.csv").read_text().splitlines()) == 1 + 4
        best = yaml.safe_load((out / "best_config.yaml").read_text())
        assert set(best["model"]) == {"hidden_dim", "dropout_rate"}

    def test_baseline(self, tmp_path, config):
        out = tmp_path / "bl"
        assert main(["baseline", "--config", config, "--out", str(out), "--e-max", "0"]) == 0
        lines = (out / "ledger.csv").read_text().splitlines()
        assert all(line.endswith(",1500,0,0,1.0") for line in lines[1:])

    def test_set_overrides_any_key(self, tmp_path, config):
        out = tmp_path / "d.csv"
        assert main(["generate", "--config", config, "--out", str(out), "--set", "data.synthetic.duration=7"]) == 0
        assert len(out.read_text().splitlines()) == 8

    def test_flag_beats_set_and_file(self, tmp_path, config):
        out = tmp_path / "d.csv"
        argv = ["generate", "--config", config, "--out", str(out), "--set", "data.synthetic.duration=7",
                "--duration", "5"]
        assert main(argv) == 0
        assert len(out.read_text().splitlines()) == 6


class TestExitCodes:
    def test_config_error(self, tmp_path):
        assert main(["generate", "--set", "data.synthetic.bogus=1", "--out", str(tmp_path / "x.csv")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["generate", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_run_without_model(self, config):
        assert main(["run", "--config", config]) == 2

    def test_data_error(self, tmp_path, config):
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,cpu\n1,1\n3,2\n2,4\n")
        assert main(["baseline", "--config", config, "--data", str(bad), "--out", str(tmp_path / "o")]) == 3

    def test_fetch_error(self, tmp_path, config):
        mdir = tmp_path / "m"
        short = ["--set", "model.input_window=2", "--set", "model.horizon=1"]  # keep the live wait short
        assert main(["train", "--config", config, "--out", str(mdir), *short]) == 0
        argv = ["run", "--config", config, "--model", str(mdir / "model.npz"), "--horizons", "1",
                "--endpoint", "http://127.0.0.1:9/metrics", "--set", "monitor.fetch_retries=1",
                "--out", str(tmp_path / "r")]
        assert main(argv) == 4

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])


class TestDeterminism:
    def test_every_command_byte_identical(self, tmp_path, config):
        def run_all(root):
            root.mkdir()
            main(["generate", "--config", config, "--out", str(root / "gen" / "data.csv")])
            main(["train", "--config", config, "--out", str(root / "model")])
            model = str(root / "model" / "model.npz")
            main(["hyperopt", "--config", config, "--out", str(root / "hp")])
            main(["run", "--config", config, "--model", model, "--out", str(root / "run")])
            main(["baseline", "--config", config, "--out", str(root / "bl")])
            main(["sweep", "--config", config, "--model", model, "--out", str(root / "sweep")])
            main(["report", "--sweep", str(root / "sweep" / "sweep.csv"), "--out", str(root / "report")])
            return {d.name: read_all(d) for d in sorted(root.iterdir())}

        a = run_all(tmp_path / "a")
        b = run_all(tmp_path / "b")
        assert set(a) == {"gen", "model", "hp", "run", "bl", "sweep", "report"}
        for name in a:
            assert a[name], name
            assert a[name] == b[name], name
