import pytest

from lowrank.path import FilePath, Path


def test_failed_write_keeps_old_content(tmp_path):
    report = FilePath(tmp_path / 'runs' / 'report.json').mkdir()
    report.dump_json({'pass': True})
    with pytest.raises(TypeError):
        report.dump_json({'pass': object()})
    assert report.load_json() == {'pass': True}
    assert [p.name for p in Path(tmp_path / 'runs').glob('*')] == ['report.json']


def test_file_path_queries(tmp_path):
    f = FilePath(tmp_path / 'a.txt')
    assert not f.is_file()
    f.write_text('x\n')
    assert f.is_file() and f.read_text() == 'x\n'
    assert f.parent == str(tmp_path)
