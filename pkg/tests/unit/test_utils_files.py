from pathlib import Path

from ergodic_lab.utils.files import atomic_write, atomic_write_text


def test_atomic_write_roundtrip(tmp_path: Path):
    dest = tmp_path / "out.txt"
    atomic_write(str(dest), b"hello")
    assert dest.read_text() == "hello"


def test_atomic_write_creates_parents_and_replaces(tmp_path: Path):
    dest = tmp_path / "nested" / "run" / "average.csv"
    atomic_write_text(dest, "a,b\n")
    atomic_write_text(dest, "c,d\n")
    assert dest.read_bytes() == b"c,d\n"
    assert [p.name for p in dest.parent.iterdir()] == ["average.csv"]


def test_atomic_write_text_keeps_newlines(tmp_path: Path):
    dest = tmp_path / "crlf.txt"
    atomic_write_text(dest, "x\r\ny\n")
    assert dest.read_bytes() == b"x\r\ny\n"
