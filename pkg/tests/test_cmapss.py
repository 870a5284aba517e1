import logging

import numpy as np
import pytest

from latent_hi.cmapss import format_trajectories, load_split, parse_rul_file, parse_trajectories
from latent_hi.errors import IntegrityError, ParseError, UnknownDatasetError
from latent_hi.synthetic import write_synthetic_cmapss

from conftest import make_traj

ROW = "1 {c} -0.0007 -0.0004 100.0 518.67 641.82 1589.70 1400.60 14.62 21.61 554.36 2388.06 9046.19 1.30 47.47 521.66 2388.02 8138.62 8.4195 0.03 392 2388 100.00 39.06 23.4190  "


def write(tmp_path, text, name="train_FD001.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_public_format_with_trailing_spaces(tmp_path):
    p = write(tmp_path, "\n".join(ROW.format(c=c) for c in (1, 2, 3)) + "\n")
    (t,) = parse_trajectories(p)
    assert t.unit_id == 1 and t.length == 3
    assert t.sensors.shape == (3, 21) and t.settings.shape == (3, 3)
    np.testing.assert_array_equal(t.cycles, [1, 2, 3])
    assert t.sensors[0, 0] == 518.67 and t.settings[0, 2] == 100.0


def test_tabs_and_runs_of_spaces(tmp_path):
    p = write(tmp_path, ROW.format(c=1).replace(" ", "\t", 5) + "\n")
    assert parse_trajectories(p)[0].length == 1


def test_wrong_column_count_reports_line(tmp_path):
    p = write(tmp_path, ROW.format(c=1) + "\n" + "1 2 3\n")
    with pytest.raises(ParseError) as ei:
        parse_trajectories(p)
    assert ei.value.line_no == 2


def test_non_numeric_reports_line(tmp_path):
    p = write(tmp_path, ROW.format(c=1).replace("641.82", "abc") + "\n")
    with pytest.raises(ParseError, match=":1:"):
        parse_trajectories(p)


def test_cycle_gap_is_integrity_error(tmp_path):
    p = write(tmp_path, ROW.format(c=1) + "\n" + ROW.format(c=3) + "\n")
    with pytest.raises(IntegrityError, match="non-contiguous"):
        parse_trajectories(p)


def test_unit_ids_must_be_contiguous(tmp_path):
    p = write(tmp_path, ROW.format(c=1).replace("1 1", "2 1", 1) + "\n")
    with pytest.raises(IntegrityError):
        parse_trajectories(p)


def test_empty_file_warns(tmp_path, caplog):
    p = write(tmp_path, "")
    with caplog.at_level(logging.WARNING):
        assert parse_trajectories(p) == []
    assert "no rows" in caplog.text


def test_round_trip():
    trajs = [make_traj(1, 7), make_traj(2, 4)]
    import tempfile, pathlib

    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "t.txt"
        p.write_text(format_trajectories(trajs))
        assert parse_trajectories(p) == trajs


def test_rul_file(tmp_path):
    test = [make_traj(i, 5) for i in (1, 2, 3)]
    p = write(tmp_path, "0\n0\n0\n", "RUL.txt")
    assert parse_rul_file(p, test) == {1: 0, 2: 0, 3: 0}
    p = write(tmp_path, "112\n98\n", "RUL2.txt")
    with pytest.raises(IntegrityError):
        parse_rul_file(p, test)


def test_rul_count_mismatch_99_for_100(tmp_path):
    test = [make_traj(i, 2) for i in range(1, 101)]
    p = write(tmp_path, "5\n" * 99, "RUL.txt")
    with pytest.raises(IntegrityError):
        parse_rul_file(p, test)


def test_load_split_synthetic_counts(tmp_path):
    write_synthetic_cmapss(tmp_path, "FD002", seed=0)
    split = load_split(tmp_path, "FD002")
    assert (len(split.train), len(split.test)) == (260, 259)
    assert len(split.test_rul) == 259
    for t in split.train[:5]:
        np.testing.assert_array_equal(t.cycles, np.arange(1, t.length + 1))


def test_load_split_truncated_copy_warns(small_cmapss, caplog):
    with caplog.at_level(logging.WARNING):
        split = load_split(small_cmapss, "FD001")
    assert len(split.train) == 20
    assert "canonical" in caplog.text


def test_load_split_errors(tmp_path):
    with pytest.raises(UnknownDatasetError):
        load_split(tmp_path, "FD005")
    with pytest.raises(FileNotFoundError, match="train_FD001.txt"):
        load_split(tmp_path, "FD001")
