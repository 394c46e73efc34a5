"""CLI surface: exit codes, output placement, the 12-layer default."""

import pytest

from conftest import FIVE_DOCS, build_model_dir, write_corpus
from embed_export.cli import main
from hypermatch import data as hm_data


@pytest.fixture(scope="module")
def model12_dir(tmp_path_factory):
    return build_model_dir(tmp_path_factory.mktemp("enc12") / "layers12", 12)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("clicorpus") / "corpus.jsonl",
                        FIVE_DOCS)


def test_export_subcommand(model12_dir, corpus, tmp_path, capsys):
    out = tmp_path / "out.hmeb"
    code = main(["export", "--model", model12_dir,
                 "--corpus", corpus, "--out", str(out)])
    assert code == 0
    assert f"wrote 5 documents to {out}" in capsys.readouterr().out
    reader = hm_data.EmbeddingFile(out)
    assert (reader.n_layers, reader.d_r) == (12, 8)
    assert len(reader) == 5


def test_out_directory_gets_default_filename(model12_dir, corpus, tmp_path):
    code = main(["export", "--model", model12_dir,
                 "--corpus", corpus, "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "embeddings.hmeb").exists()


def test_mean_pooling_flag(model12_dir, corpus, tmp_path):
    out = tmp_path / "mean.hmeb"
    code = main(["export", "--model", model12_dir, "--corpus", corpus,
                 "--out", str(out), "--pooling", "mean"])
    assert code == 0
    assert hm_data.EmbeddingFile(out).n_layers == 12


def test_missing_corpus_is_a_runtime_error(model12_dir, tmp_path, capsys):
    code = main(["export", "--model", model12_dir,
                 "--corpus", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "x.hmeb")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_layer_mismatch_is_a_runtime_error(corpus, tmp_path, capsys,
                                           tmp_path_factory):
    two_layer = build_model_dir(tmp_path_factory.mktemp("enc2") / "layers2", 2)
    code = main(["export", "--model", two_layer,
                 "--corpus", corpus, "--out", str(tmp_path / "x.hmeb")])
    assert code == 1
    assert "expected 12" in capsys.readouterr().err


def test_unknown_pooling_is_a_usage_error(model12_dir, corpus, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["export", "--model", model12_dir, "--corpus", corpus,
              "--out", str(tmp_path / "x.hmeb"), "--pooling", "max"])
    assert err.value.code == 2


def test_subcommand_is_required():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
