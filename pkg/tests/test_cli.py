import json

import pytest

import relgrid.cli
from relgrid.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from relgrid.trainer import NumericError

FIG2A_RECORD = {
    "id": "fig2a",
    "tokens": ["New", "York", "City", "is", "located", "in", "New", "York", "State"],
    "triples": [{"head": [0, 2], "relation": "located_in", "tail": [6, 8]}],
}


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def synth_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.jsonl"
    code = main(
        [
            "synth",
            "--out",
            str(path),
            "--count",
            "16",
            "--num-relations",
            "3",
            "--seed",
            "5",
        ]
    )
    assert code == EXIT_OK
    return path


class TestSynth:
    def test_writes_corpus_and_reports_counts(self, capsys, tmp_path):
        out = tmp_path / "c.jsonl"
        code, stdout, _ = run(
            capsys, "synth", "--out", str(out), "--count", "12", "--seed", "3"
        )
        assert code == EXIT_OK
        assert out.exists()
        assert "intended pattern counts" in stdout
        assert len(out.read_text().splitlines()) == 12

    def test_same_seed_same_bytes(self, capsys, tmp_path):
        outs = []
        for name in ("x.jsonl", "y.jsonl"):
            out = tmp_path / name
            code, _, _ = run(
                capsys, "synth", "--out", str(out), "--count", "10", "--seed", "9"
            )
            assert code == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_infeasible_mix_is_data_error(self, capsys, tmp_path):
        code, _, stderr = run(
            capsys,
            "synth",
            "--out",
            str(tmp_path / "z.jsonl"),
            "--count",
            "4",
            "--num-relations",
            "1",
            "--mix",
            "epo=1.0",
        )
        assert code == EXIT_DATA
        assert "relations" in stderr


class TestStats:
    def test_prints_breakdown(self, capsys, synth_file):
        code, stdout, _ = run(capsys, "stats", "--data", str(synth_file))
        assert code == EXIT_OK
        for key in ("sentences", "triples", "normal", "epo", "seo", "hto", "N=1"):
            assert key in stdout

    def test_missing_file_is_data_error(self, capsys):
        code, _, stderr = run(capsys, "stats", "--data", "/nope/missing.jsonl")
        assert code == EXIT_DATA
        assert "missing.jsonl" in stderr

    def test_empty_corpus_is_data_error(self, capsys, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        relations = tmp_path / "rels.txt"
        relations.write_text("r0\n")
        code, _, stderr = run(
            capsys, "stats", "--data", str(empty), "--relations", str(relations)
        )
        assert code == EXIT_DATA
        assert "empty corpus" in stderr


class TestTrainEval:
    def test_train_writes_checkpoint_and_log(self, capsys, synth_file, tmp_path):
        ck = tmp_path / "model.npz"
        code, stdout, _ = run(
            capsys,
            "train",
            "--data",
            str(synth_file),
            "--epochs",
            "2",
            "--seed",
            "7",
            "--out",
            str(ck),
        )
        assert code == EXIT_OK
        assert ck.exists()
        log_lines = (tmp_path / "model.npz.log").read_text().splitlines()
        assert len(log_lines) == 2

    def test_same_seed_same_loss_column(self, capsys, synth_file, tmp_path):
        columns = []
        for name in ("a.npz", "b.npz"):
            ck = tmp_path / name
            code, _, _ = run(
                capsys,
                "train",
                "--data",
                str(synth_file),
                "--epochs",
                "2",
                "--seed",
                "11",
                "--out",
                str(ck),
            )
            assert code == EXIT_OK
            lines = (tmp_path / f"{name}.log").read_text().splitlines()
            columns.append([line.split("\t")[:2] for line in lines])
        assert columns[0] == columns[1]

    def test_missing_data_names_path(self, capsys):
        code, _, stderr = run(capsys, "train", "--data", "/nope/data.jsonl")
        assert code == EXIT_DATA
        assert "/nope/data.jsonl" in stderr

    def test_config_file_with_flag_override(self, capsys, synth_file, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(
            json.dumps({"data": str(synth_file), "epochs": 1, "seed": 2})
        )
        ck = tmp_path / "cfg.npz"
        code, _, _ = run(
            capsys,
            "train",
            "--config",
            str(config),
            "--epochs",
            "3",
            "--out",
            str(ck),
        )
        assert code == EXIT_OK
        assert len((tmp_path / "cfg.npz.log").read_text().splitlines()) == 3

    def test_eval_prints_both_modes(self, capsys, synth_file, tmp_path):
        ck = tmp_path / "e.npz"
        run(
            capsys,
            "train",
            "--data",
            str(synth_file),
            "--epochs",
            "1",
            "--seed",
            "3",
            "--out",
            str(ck),
        )
        code, stdout, _ = run(
            capsys, "eval", "--data", str(synth_file), "--checkpoint", str(ck)
        )
        assert code == EXIT_OK
        assert "match mode: partial" in stdout
        assert "match mode: exact" in stdout
        assert "inference wall-clock" in stdout
        assert "partial.f1=" in stdout and "exact.f1=" in stdout

    def test_eval_vocab_mismatch_is_data_error(self, capsys, synth_file, tmp_path):
        ck = tmp_path / "m.npz"
        run(
            capsys,
            "train",
            "--data",
            str(synth_file),
            "--epochs",
            "1",
            "--seed",
            "3",
            "--out",
            str(ck),
        )
        bad_vocab = tmp_path / "vocab.json"
        bad_vocab.write_text(json.dumps({"<pad>": 0, "<unk>": 1, "stranger": 2}))
        code, _, stderr = run(
            capsys,
            "eval",
            "--data",
            str(synth_file),
            "--checkpoint",
            str(ck),
            "--vocab",
            str(bad_vocab),
        )
        assert code == EXIT_DATA
        assert "vocab" in stderr

    def test_eval_missing_checkpoint(self, capsys, synth_file):
        code, _, _ = run(
            capsys, "eval", "--data", str(synth_file), "--checkpoint", "/nope/c.npz"
        )
        assert code == EXIT_DATA


class TestTag:
    def test_documented_cells_in_grid(self, capsys):
        code, stdout, _ = run(
            capsys, "tag", "--sentence", json.dumps(FIG2A_RECORD)
        )
        assert code == EXIT_OK
        lines = stdout.splitlines()
        grid_rows = [l for l in lines if l.startswith(("New", "City"))]
        assert "HB-TB" in grid_rows[0] and "HB-TE" in grid_rows[0]
        assert any("HE-TE" in row for row in grid_rows)
        assert "(0..2, located_in, 6..8)" in stdout
        assert "roundtrip: exact" in stdout

    def test_no_triples_reports_exact_empty(self, capsys):
        record = {"id": "x", "tokens": ["a", "b"], "triples": []}
        code, stdout, _ = run(capsys, "tag", "--sentence", json.dumps(record))
        assert code == EXIT_OK
        assert "roundtrip: exact (empty)" in stdout

    def test_hto_tags_near_diagonal(self, capsys):
        record = {
            "id": "hto",
            "tokens": ["New", "York", "City"],
            "triples": [{"head": [0, 2], "relation": "city_name", "tail": [0, 1]}],
        }
        code, stdout, _ = run(capsys, "tag", "--sentence", json.dumps(record))
        assert code == EXIT_OK
        lines = stdout.splitlines()
        new_row = next(l for l in lines if l.startswith("New "))
        city_row = next(l for l in lines if l.startswith("City"))
        assert "HB-TB" in new_row and "HB-TE" in new_row
        assert "HE-TE" in city_row
        assert "roundtrip: exact" in stdout

    def test_malformed_input_is_data_error(self, capsys):
        code, _, stderr = run(capsys, "tag", "--sentence", "{broken")
        assert code == EXIT_DATA
        assert "invalid" in stderr


class TestUsage:
    def test_unknown_flag_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--nonsense"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_subcommand_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE

    def test_numeric_failure_exits_three(self, capsys, synth_file, monkeypatch):
        def blow_up(*args, **kwargs):
            raise NumericError("non-finite gradient in parameter group 'pair_proj'")

        monkeypatch.setattr(relgrid.cli, "train", blow_up)
        code, _, stderr = run(capsys, "train", "--data", str(synth_file), "--epochs", "1")
        assert code == EXIT_NUMERIC
        assert "pair_proj" in stderr

    def test_eval_can_export_relation_columns(self, capsys, synth_file, tmp_path):
        ck = tmp_path / "x.npz"
        run(capsys, "train", "--data", str(synth_file), "--epochs", "1",
            "--seed", "3", "--out", str(ck))
        tsv = tmp_path / "rel.tsv"
        code, stdout, _ = run(
            capsys, "eval", "--data", str(synth_file), "--checkpoint", str(ck),
            "--match", "exact", "--export-relations", str(tsv),
        )
        assert code == EXIT_OK
        lines = tsv.read_text().splitlines()
        assert len(lines) == 3 * 4  # relations x tag classes
        assert lines[0].split("\t")[0] == "rel0/NONE"
