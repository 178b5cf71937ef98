import subprocess
import sys

import numpy as np
import pytest

from cne.checkpoint import load_checkpoint
from cne.cli import ConfigError, main, parse_config
from cne.text import Vocabulary

SMALL = ["--token-dim", "6", "--hidden-dim", "5", "--walks-per-node", "2", "--walk-length", "6",
         "--batch", "32", "--sample-nodes", "20"]


@pytest.fixture
def fixture_files(tmp_path):
    edges, attrs = tmp_path / "edges.tsv", tmp_path / "attrs.tsv"
    assert main(["synth", "--synth-nodes", "40", "--edges", str(edges), "--attributes", str(attrs)]) == 0
    return tmp_path, edges, attrs


def train_eval(d, edges, attrs, *extra, tag=""):
    ck, vocab, rep = d / f"m{tag}.ckpt", d / f"vocab{tag}.txt", d / f"report{tag}.csv"
    common = ["--edges", str(edges), "--attributes", str(attrs), "--vocab", str(vocab), "--checkpoint", str(ck)]
    assert main(["train", *common, *SMALL, *extra, "--loss-log", str(d / f"loss{tag}.csv")]) == 0
    assert main(["eval", *common, *SMALL, *extra, "--report", str(rep)]) == 0
    return ck, vocab, rep


def test_paper_defaults(tmp_path):
    cfg = parse_config("synth", overrides={"edges": str(tmp_path / "e"), "attributes": str(tmp_path / "a")}, env={})
    tc = cfg.train_config()
    assert (tc.walk_length, tc.window, tc.negatives, tc.margin) == (20, 2, 4, 1.0)
    assert (tc.token_dim, tc.hidden_dim, tc.lr, tc.batch) == (256, 512, 8e-4, 256)


def test_empty_file_gives_defaults(tmp_path):
    (tmp_path / "c.cfg").write_text("# nothing here\n\n")
    cfg = parse_config("synth", tmp_path / "c.cfg", {"edges": str(tmp_path / "e"), "attributes": str(tmp_path / "a")},
                       env={})
    assert cfg.window == 2 and cfg.hidden_dim == 512


def test_flag_beats_file(tmp_path):
    (tmp_path / "c.cfg").write_text("window=2\nedges=%s\nattributes=%s\n" % (tmp_path / "e", tmp_path / "a"))
    assert parse_config("synth", tmp_path / "c.cfg", {"window": "3"}, env={}).window == 3
    assert parse_config("synth", tmp_path / "c.cfg", {}, env={}).window == 2


def test_unparsable_value_names_key(tmp_path):
    (tmp_path / "c.cfg").write_text("\nwindow=abc\n")
    with pytest.raises(ConfigError, match=r"line 2.*window"):
        parse_config("synth", tmp_path / "c.cfg", {"edges": "e", "attributes": "a"}, env={})
    with pytest.raises(ConfigError, match=r"--window.*window"):
        parse_config("synth", None, {"window": "abc", "edges": "e", "attributes": "a"}, env={})


def test_unknown_key_names_line(tmp_path):
    (tmp_path / "c.cfg").write_text("window=2\nwindoww=3\n")
    with pytest.raises(ConfigError, match=r"line 2.*windoww"):
        parse_config("synth", tmp_path / "c.cfg", {}, env={})
    (tmp_path / "d.cfg").write_text("window 3\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("synth", tmp_path / "d.cfg", {}, env={})


def test_missing_paths(tmp_path):
    with pytest.raises(ConfigError, match="attributes"):
        parse_config("train", None, {"edges": str(tmp_path / "e")}, env={})
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config("train", None, {"edges": str(tmp_path / "nope"), "attributes": str(tmp_path / "nope2"),
                                     "vocab": str(tmp_path / "v"), "checkpoint": str(tmp_path / "c")}, env={})
    with pytest.raises(ConfigError, match="directory"):
        parse_config("synth", None, {"edges": str(tmp_path / "x" / "e"), "attributes": str(tmp_path / "a")}, env={})


def test_seed_precedence(tmp_path):
    paths = {"edges": str(tmp_path / "e"), "attributes": str(tmp_path / "a")}
    assert parse_config("synth", None, dict(paths), env={}).seed == 0
    assert parse_config("synth", None, dict(paths), env={"CNE_SEED": "7"}).seed == 7
    (tmp_path / "c.cfg").write_text("seed=5\n")
    assert parse_config("synth", tmp_path / "c.cfg", dict(paths), env={"CNE_SEED": "7"}).seed == 5
    assert parse_config("synth", tmp_path / "c.cfg", dict(paths, seed="9"), env={"CNE_SEED": "7"}).seed == 9
    assert parse_config("synth", None, dict(paths), env={"CNE_SEED": "7"}).split_seed == 7


def test_config_hash_ignores_paths(tmp_path):
    a = parse_config("synth", None, {"edges": str(tmp_path / "e"), "attributes": str(tmp_path / "a")}, env={})
    b = parse_config("synth", None, {"edges": str(tmp_path / "f"), "attributes": str(tmp_path / "b")}, env={})
    c = parse_config("synth", None, {"edges": str(tmp_path / "e"), "attributes": str(tmp_path / "a"),
                                     "window": "3"}, env={})
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_errors_exit_nonzero_with_one_line(tmp_path, capsys):
    assert main(["train", "--edges", str(tmp_path / "missing")]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("cne train: error:")


def test_unknown_subcommand_exits_2():
    out = subprocess.run([sys.executable, "-m", "cne", "frobnicate"], capture_output=True, text=True)
    assert out.returncode == 2
    assert "usage:" in out.stderr


def test_train_then_eval(fixture_files):
    d, edges, attrs = fixture_files
    ck, vocab, rep = train_eval(d, edges, attrs)
    lines = rep.read_text().splitlines()
    assert lines[0].startswith("# cne eval config_hash=") and "seed=0" in lines[0]
    assert lines[1] == "k,precision,recall"
    assert load_checkpoint(ck).specs["node"].h == 5
    assert vocab.read_text().startswith("# cne train config_hash=")
    assert len(Vocabulary.load(vocab)) > 1
    assert (d / "loss.csv").read_text().startswith("# cne train")
    assert edges.read_text().startswith("# cne synth")


def test_rerun_overwrites(fixture_files):
    d, edges, attrs = fixture_files
    ck, _, rep = train_eval(d, edges, attrs)
    first = (ck.read_bytes(), rep.read_bytes(), (d / "loss.csv").read_bytes())
    ck, _, rep = train_eval(d, edges, attrs)
    assert (ck.read_bytes(), rep.read_bytes(), (d / "loss.csv").read_bytes()) == first


def test_rank_dump(fixture_files):
    import json
    d, edges, attrs = fixture_files
    ck, vocab, _ = train_eval(d, edges, attrs)
    assert main(["eval", "--edges", str(edges), "--attributes", str(attrs), "--vocab", str(vocab),
                 "--checkpoint", str(ck), "--report", str(d / "r2.csv"), "--rank-dump", str(d / "ranks.jsonl"),
                 *SMALL]) == 0
    rows = [json.loads(l) for l in (d / "ranks.jsonl").read_text().splitlines()]
    assert rows and all(set(r) == {"node", "rank_list_of_truth"} for r in rows)


def test_embed_unseen_node(fixture_files):
    d, edges, attrs = fixture_files
    ck, vocab, _ = train_eval(d, edges, attrs)
    with open(attrs, "a") as fh:
        fh.write("brand_new\tb0_w1 b0_w2 noise3 never_seen_token\n")
    out = d / "emb.tsv"
    args = ["embed", "--attributes", str(attrs), "--vocab", str(vocab), "--checkpoint", str(ck),
            "--embeddings", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# cne embed")
    rows = dict(l.split("\t") for l in lines[1:])
    assert "brand_new" in rows and len(rows) == 41
    vec = np.array([float(x) for x in rows["brand_new"].split(",")], dtype=np.float32)
    assert vec.shape == (5,) and np.isfinite(vec).all()
    # 9 significant digits round-trip float32 exactly
    assert all(f"{np.float32(float(x)):.9g}" == x for x in rows["brand_new"].split(","))
    # --workers caps parallelism without changing output
    out2 = d / "emb2.tsv"
    args[-1] = str(out2)
    assert main(args + ["--workers", "3"]) == 0
    assert out2.read_bytes() == out.read_bytes()


def test_eval_workers_invariant(fixture_files):
    d, edges, attrs = fixture_files
    _, _, rep = train_eval(d, edges, attrs)
    _, _, rep2 = train_eval(d, edges, attrs, "--workers", "2", tag="w")
    assert rep.read_bytes() == rep2.read_bytes()  # header too: workers is not part of the hash


def test_walk_and_build_vocab(fixture_files):
    d, edges, attrs = fixture_files
    out = d / "walks.txt"
    assert main(["walk", "--edges", str(edges), "--walks-out", str(out), "--walks-per-node", "2",
                 "--walk-length", "5"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# cne walk")
    walks = [l.split(" ") for l in lines[1:]]
    # isolated nodes never appear in the edge list, so count from it
    labels = {x for l in edges.read_text().splitlines() if not l.startswith("#") for x in l.split("\t")[:2]}
    assert len(walks) == 2 * len(labels) and all(1 <= len(w) <= 5 for w in walks)
    assert all(tok in labels for w in walks for tok in w)
    assert main(["build-vocab", "--attributes", str(attrs), "--vocab", str(d / "v.txt"), "--max-vocab", "10"]) == 0
    assert len(Vocabulary.load(d / "v.txt")) <= 11
