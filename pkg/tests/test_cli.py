"""End-to-end CLI behaviour and exit codes."""

import json

import pytest

from faceassist.cascade import load_cascade_json, save_cascade_json
from faceassist.cli import main
from faceassist.imaging import save_pgm

from conftest import contrast_cascade, planted_frame, synthetic_face
from test_cascade import MINIMAL_XML, EXPECTED_MINIMAL_MODEL


@pytest.fixture
def key_env(monkeypatch):
    monkeypatch.setenv("FACEASSIST_TEST_KEY", "cli secret")
    return "FACEASSIST_TEST_KEY"


class TestCascadeConvert:
    def test_convert_round_trip(self, tmp_path, capsys):
        xml_path = tmp_path / "model.xml"
        json_path = tmp_path / "model.json"
        xml_path.write_text(MINIMAL_XML)
        assert main(["cascade", "convert", str(xml_path), str(json_path)]) == 0
        assert load_cascade_json(json_path.read_bytes()) == EXPECTED_MINIMAL_MODEL
        assert "1 stages" in capsys.readouterr().out

    def test_convert_bad_xml_exits_1(self, tmp_path, capsys):
        xml_path = tmp_path / "bad.xml"
        xml_path.write_text("<nope/>")
        assert main(["cascade", "convert", str(xml_path), str(tmp_path / "o.json")]) == 1
        assert "error:" in capsys.readouterr().err


class TestEnrollIdentify:
    def test_enroll_then_identify(self, tmp_path, key_env, capsys):
        face_path = tmp_path / "face.pgm"
        face_path.write_bytes(save_pgm(synthetic_face(1, size=110)))
        store_dir = tmp_path / "store"
        assert (
            main(
                [
                    "enroll",
                    str(face_path),
                    "--name",
                    "Ana",
                    "--store",
                    str(store_dir),
                    "--key-env",
                    key_env,
                ]
            )
            == 0
        )
        person_id = capsys.readouterr().out.strip()
        assert person_id
        assert (
            main(
                ["identify", str(face_path), "--store", str(store_dir), "--key-env", key_env]
            )
            == 0
        )
        out = capsys.readouterr().out
        assert person_id in out
        assert "Ana" in out

    def test_identify_unknown_face(self, tmp_path, key_env, capsys):
        known = tmp_path / "known.pgm"
        known.write_bytes(save_pgm(synthetic_face(1, size=110)))
        other = tmp_path / "other.pgm"
        other.write_bytes(save_pgm(synthetic_face(2, size=110)))
        store_dir = tmp_path / "store"
        main(["enroll", str(known), "--name", "Ana", "--store", str(store_dir), "--key-env", key_env])
        capsys.readouterr()
        assert main(["identify", str(other), "--store", str(store_dir), "--key-env", key_env]) == 0
        assert "unknown" in capsys.readouterr().out


class TestEvalDetectCli:
    @pytest.fixture
    def corpus(self, tmp_path):
        corpus_dir = tmp_path / "frames"
        corpus_dir.mkdir()
        rows = []
        for i in range(3):
            img, truth = planted_frame(64, 64, 10 + i, 12, 16)
            (corpus_dir / f"f{i}.pgm").write_bytes(save_pgm(img))
            rows.append(
                {
                    "frame": f"f{i}.pgm",
                    "boxes": [{"x": truth.x, "y": truth.y, "w": truth.w, "h": truth.h}],
                }
            )
        ann = tmp_path / "ann.json"
        ann.write_text(json.dumps(rows))
        cascade_path = tmp_path / "cascade.json"
        cascade_path.write_bytes(
            save_cascade_json(contrast_cascade(16, 16, stump_threshold=0.5))
        )
        return corpus_dir, ann, cascade_path

    def test_detect_table_output(self, corpus, capsys):
        corpus_dir, ann, cascade_path = corpus
        code = main(
            [
                "eval",
                "detect",
                "--corpus",
                str(corpus_dir),
                "--annotations",
                str(ann),
                "--cascade",
                str(cascade_path),
                "--min-neighbors",
                "0",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].split()[0] == "id"
        assert "all" in out

    def test_detect_csv_output(self, corpus, capsys):
        corpus_dir, ann, cascade_path = corpus
        code = main(
            [
                "eval",
                "detect",
                "--corpus",
                str(corpus_dir),
                "--annotations",
                str(ann),
                "--cascade",
                str(cascade_path),
                "--min-neighbors",
                "0",
                "--csv",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "id,framesWithFaces,detections,correct,incorrect,accuracy"

    def test_missing_annotation_file_exits_1(self, corpus, capsys):
        corpus_dir, _, cascade_path = corpus
        code = main(
            [
                "eval",
                "detect",
                "--corpus",
                str(corpus_dir),
                "--annotations",
                "/nonexistent.json",
                "--cascade",
                str(cascade_path),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestUsageErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "detect", "--corpus", "x"])
        assert exc.value.code == 2

    def test_help_available(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "faceassist" in capsys.readouterr().out
