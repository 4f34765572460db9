import os
import shutil
from collections import Counter

import pytest

from jasen import cli, synthetic
from jasen.config import ConfigError, RunConfig, apply_env, parse_config

FAST = ["--dim", "10", "--epochs", "2", "--pretrain-epochs", "1",
        "--max-self-train-epochs", "2", "--min-count", "2"]


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.dim, cfg.window, cfg.lambda_g, cfg.lambda_r) == (100, 5, 2.5, 1.0)
        assert (cfg.temperature, cfg.cnn_lr, cfg.batch_size) == (20.0, 1e-3, 16)

    def test_round_trip(self):
        cfg = RunConfig(corpus="c.txt", dim=12, lambda_g=0.5, no_joint=True, scoring="joint")
        again = parse_config(cfg.to_text())
        assert again == cfg
        assert parse_config(again.to_text()).to_text() == cfg.to_text()

    def test_comments_and_dashes(self):
        cfg = parse_config("# comment\n\nmodel-dir = out\nno_joint = yes\n")
        assert cfg.model_dir == "out" and cfg.no_joint is True

    @pytest.mark.parametrize("text, match", [
        ("dimm=3", "unknown key"),
        ("dim", "key=value"),
        ("dim=abc", "cannot parse"),
        ("no_joint=maybe", "boolean"),
    ])
    def test_parse_errors(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text)

    @pytest.mark.parametrize("change", [{"dim": 0}, {"cnn_lr": 0.0}, {"lambda_g": -1.0},
                                        {"scoring": "other"}])
    def test_validation(self, change):
        with pytest.raises(ConfigError):
            RunConfig(**change).validate()

    def test_env_seed(self):
        assert apply_env(RunConfig(), {"JASEN_SEED": "7"}).seed == 7
        assert apply_env(RunConfig(seed=3), {}).seed == 3
        with pytest.raises(ConfigError):
            apply_env(RunConfig(), {"JASEN_SEED": "x"})

    def test_precedence(self, tmp_path, monkeypatch):
        conf = tmp_path / "c.cfg"
        conf.write_text("seed=1\ndim=7\n")
        monkeypatch.setenv("JASEN_SEED", "2")
        args = cli.build_parser().parse_args(["train", "--config", str(conf), "--window", "3"])
        cfg = cli.resolve_config(args)
        assert (cfg.seed, cfg.dim, cfg.window) == (2, 7, 3)
        args = cli.build_parser().parse_args(["train", "--config", str(conf), "--seed", "9"])
        assert cli.resolve_config(args).seed == 9

    def test_pipeline_mapping(self):
        p = RunConfig(no_joint=True, emb_lr=0.05, seed=4).pipeline()
        assert p.embed.use_joint is False and p.embed.lr == 0.05 and p.cnn.seed == 4


pytestmark_slow = pytest.mark.slow


@pytest.fixture(scope="module")
def fixture_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    return synthetic.write_fixture(synthetic.generate(n_train=2000, n_test=300, seed=0), root)


@pytest.fixture(scope="module")
def trained(fixture_files, tmp_path_factory):
    """Model directory produced by ``train`` with the default configuration."""
    out = str(tmp_path_factory.mktemp("model"))
    code = cli.main(["train", "--corpus", fixture_files["corpus"], "--schema",
                     fixture_files["schema"], "--model-dir", out])
    assert code == 0
    return out


def _run(capsys, argv):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytestmark_slow
class TestTrain:
    def test_files_written(self, trained):
        for name in (cli.EMB_FILE, cli.ASPECT_FILE, cli.SENTIMENT_FILE, cli.LOG_FILE,
                     cli.VOCAB_FILE):
            assert os.path.getsize(os.path.join(trained, name)) > 0

    def test_log_records(self, trained):
        with open(os.path.join(trained, cli.LOG_FILE)) as f:
            lines = f.read().splitlines()
        assert sum(line.startswith("stage=embed ") for line in lines) == 5

    def test_missing_schema(self, capsys, fixture_files, tmp_path):
        missing = str(tmp_path / "nope.txt")
        code, _, err = _run(capsys, ["train", "--corpus", fixture_files["corpus"],
                                     "--schema", missing, "--model-dir", str(tmp_path)])
        assert code == 2 and missing in err

    def test_missing_corpus_flag(self, capsys, fixture_files, tmp_path):
        code, _, err = _run(capsys, ["train", "--schema", fixture_files["schema"],
                                     "--model-dir", str(tmp_path)])
        assert code == 2 and "--corpus" in err

    def test_no_joint_log(self, capsys, fixture_files, tmp_path):
        code, _, _ = _run(capsys, ["train", "--corpus", fixture_files["corpus"], "--schema",
                                   fixture_files["schema"], "--model-dir", str(tmp_path),
                                   "--no-joint", *FAST])
        assert code == 0
        embed = [line for line in (tmp_path / cli.LOG_FILE).read_text().splitlines()
                 if line.startswith("stage=embed ")]
        assert len(embed) == 2
        for line in embed:
            values = dict(kv.split("=") for kv in line.split())
            assert float(values["joint"]) == 0.0 and float(values["cross"]) == 0.0

    def test_byte_identical_runs(self, capsys, fixture_files, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            assert cli.main(["train", "--corpus", fixture_files["corpus"], "--schema",
                             fixture_files["schema"], "--model-dir", str(d), *FAST]) == 0
        for name in (cli.EMB_FILE, cli.ASPECT_FILE, cli.SENTIMENT_FILE, cli.VOCAB_FILE,
                     cli.LOG_FILE):
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


@pytestmark_slow
class TestPredict:
    def test_planted_review(self, capsys, trained, tmp_path):
        inp = tmp_path / "in.txt"
        words = [synthetic.joint_term("good", "food", k) for k in range(6)]
        inp.write_text(" ".join(words + ["filler01", "pizza"]) + "\n")
        code, out, _ = _run(capsys, ["predict", "--model-dir", trained, "--input", str(inp)])
        assert code == 0
        text, sent, asp, ps, pa = out.rstrip("\n").split("\t")
        assert (sent, asp) == ("good", "food")
        assert 0.5 <= float(ps) <= 1 and 1 / 3 <= float(pa) <= 1

    def test_empty_input(self, capsys, trained, tmp_path):
        inp = tmp_path / "in.txt"
        inp.write_text("")
        outp = tmp_path / "out.tsv"
        code, _, _ = _run(capsys, ["predict", "--model-dir", trained, "--input", str(inp),
                                   "--output", str(outp)])
        assert code == 0 and outp.read_text() == ""

    def test_oov_review_uses_fallback(self, capsys, trained, tmp_path):
        inp = tmp_path / "in.txt"
        inp.write_text("qqqq zzzz\n")
        code, out, _ = _run(capsys, ["predict", "--model-dir", trained, "--input", str(inp)])
        fields = out.rstrip("\n").split("\t")
        assert code == 0 and float(fields[3]) == 0.5

    def test_deterministic(self, capsys, trained, fixture_files, tmp_path):
        outs = []
        for name in ("a.tsv", "b.tsv"):
            cli.main(["predict", "--model-dir", trained, "--input", fixture_files["corpus"],
                      "--output", str(tmp_path / name)])
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1] and outs[0].count(b"\n") == 2000

    def test_corrupt_model(self, capsys, trained, tmp_path):
        broken = tmp_path / "m"
        shutil.copytree(trained, broken)
        with open(broken / cli.ASPECT_FILE, "r+b") as f:
            f.truncate(100)
        inp = tmp_path / "in.txt"
        inp.write_text("good food\n")
        code, _, err = _run(capsys, ["predict", "--model-dir", str(broken), "--input", str(inp)])
        assert code == 3 and "corrupt" in err

    def test_corrupt_embedding(self, capsys, trained, tmp_path):
        broken = tmp_path / "m"
        shutil.copytree(trained, broken)
        (broken / cli.EMB_FILE).write_text("garbage\n")
        code, _, _ = _run(capsys, ["inspect", "--model-dir", str(broken), "--topic", "good"])
        assert code == 3


@pytestmark_slow
class TestInspect:
    def test_joint_topic(self, capsys, trained):
        code, out, _ = _run(capsys, ["inspect", "--model-dir", trained, "--topic", "good|service"])
        terms = out.split()
        assert code == 0 and len(terms) == 5
        planted = {synthetic.joint_term("good", "service", k) for k in range(20)}
        assert len(planted & set(terms)) >= 3

    def test_unknown_topic(self, capsys, trained):
        code, _, err = _run(capsys, ["inspect", "--model-dir", trained, "--topic", "goood|service"])
        assert code == 2 and "good|service" in err

    def test_n(self, capsys, trained):
        code, out, _ = _run(capsys, ["inspect", "--model-dir", trained, "--topic", "food", "-n", "8"])
        assert code == 0 and len(out.split()) == 8

    def test_export_proj(self, capsys, trained, tmp_path):
        out = tmp_path / "proj.tsv"
        code, _, _ = _run(capsys, ["export-proj", "--model-dir", trained, "--output", str(out)])
        rows = [line.split("\t") for line in out.read_text().splitlines()]
        assert code == 0 and len(rows) == 3 + 2 + 3 * 2
        assert {r[0] for r in rows} >= {"food", "bad", "bad|ambience"}
        assert all(len(r) == 3 for r in rows)


@pytestmark_slow
class TestEvaluateAndVocab:
    def test_evaluate(self, capsys, trained, fixture_files):
        code, out, _ = _run(capsys, ["evaluate", "--model-dir", trained, "--test",
                                     fixture_files["test"]])
        assert code == 0
        values = dict(line.split("=") for line in out.splitlines() if "=" in line)
        assert float(values["aspect.accuracy"]) >= 0.8
        assert float(values["sentiment.accuracy"]) >= 0.8

    def test_build_vocab(self, capsys, fixture_files, tmp_path):
        out = tmp_path / "v.txt"
        code, stdout, _ = _run(capsys, ["build-vocab", "--corpus", fixture_files["corpus"],
                                        "--out", str(out)])
        with open(fixture_files["corpus"]) as f:
            counts = Counter(w for line in f for w in line.split())
        rows = [line.split("\t") for line in out.read_text().splitlines()]
        assert code == 0
        assert {t: int(c) for t, c in rows} == {t: c for t, c in counts.items() if c >= 3}

    def test_sweep_keywords(self, capsys, fixture_files, tmp_path):
        code, out, _ = _run(capsys, ["sweep-keywords", "--corpus", fixture_files["corpus"],
                                     "--schema", fixture_files["schema"], "--test",
                                     fixture_files["test"], "--k", "1", "4", *FAST])
        rows = out.splitlines()
        assert code == 0 and rows[0] == "k\taspect_macro_f1" and len(rows) == 3
        assert [r.split("\t")[0] for r in rows[1:]] == ["1", "4"]

    def test_sweep_rejects_zero(self, capsys, fixture_files):
        code, _, err = _run(capsys, ["sweep-keywords", "--corpus", fixture_files["corpus"],
                                     "--schema", fixture_files["schema"], "--test",
                                     fixture_files["test"], "--k", "0", *FAST])
        assert code == 2 and "k" in err

    def test_missing_test_file(self, capsys, trained, tmp_path):
        code, _, err = _run(capsys, ["evaluate", "--model-dir", trained, "--test",
                                     str(tmp_path / "none.tsv")])
        assert code == 2 and "none.tsv" in err
