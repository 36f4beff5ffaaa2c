import json
import shutil

from eb2jml.cli import main

from conftest import MACHINES_DIR


def _copy(tmp_path, name):
    dst = tmp_path / name
    shutil.copy(MACHINES_DIR / name, dst)
    return dst


def test_translate_writes_file(tmp_path, capsys):
    src = _copy(tmp_path, "social_ref1.ebm")
    out = tmp_path / "ref1_permissions.java"
    assert main(["translate", str(src), "-o", str(out)]) == 0
    text = out.read_text()
    assert "public abstract class ref1_permissions" in text
    assert "wrote" in capsys.readouterr().out


def test_translate_default_output_name(tmp_path, capsys, monkeypatch):
    src = _copy(tmp_path, "counter.ebm")
    monkeypatch.chdir(tmp_path)
    assert main(["translate", str(src)]) == 0
    assert (tmp_path / "counter.java").exists()


def test_translate_is_stable(tmp_path, capsys):
    src = _copy(tmp_path, "counter.ebm")
    out1, out2 = tmp_path / "a.java", tmp_path / "b.java"
    assert main(["translate", str(src), "-o", str(out1)]) == 0
    assert main(["translate", str(src), "-o", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_missing_file_names_the_path(capsys):
    assert main(["translate", "no_such_machine.ebm"]) == 2
    err = capsys.readouterr().err
    assert "no_such_machine.ebm" in err


def test_refines_gives_out_of_subset_error(tmp_path, capsys):
    src = tmp_path / "refined.ebm"
    src.write_text("machine m refines abstract variables v events "
                   "initialisation begin a1: v := 0 end end")
    assert main(["translate", str(src)]) == 2
    assert "refines" in capsys.readouterr().err


def test_well_formedness_errors_exit_2(tmp_path, capsys):
    src = tmp_path / "bad.ebm"
    src.write_text("machine m variables v invariants i1: v : INT events "
                   "initialisation begin a1: w := 0 end end")
    assert main(["check", str(src)]) == 2
    assert "'w'" in capsys.readouterr().err


def test_check_counter_passes(tmp_path, capsys):
    src = _copy(tmp_path, "counter.ebm")
    assert main(["check", str(src), "--int-range", "0..1"]) == 0
    out = capsys.readouterr().out
    assert "overall: PASS" in out


def test_check_social_flagship(tmp_path, capsys):
    src = _copy(tmp_path, "social_abstract.ebm")
    code = main(["check", str(src), "--carrier", "PERSON=2",
                 "--carrier", "CONTENTS=2"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 4  # three verdicts plus the overall line


def test_check_tiny_ceiling_exit_3(tmp_path, capsys):
    src = _copy(tmp_path, "social_abstract.ebm")
    assert main(["check", str(src), "--ceiling", "10"]) == 3
    assert "RESOURCE_LIMIT" in capsys.readouterr().out


def test_ceiling_env_override(tmp_path, capsys, monkeypatch):
    src = _copy(tmp_path, "social_abstract.ebm")
    monkeypatch.setenv("EB2JML_CEILING", "10")
    assert main(["check", str(src)]) == 3
    monkeypatch.setenv("EB2JML_CEILING", "1000000")
    assert main(["check", str(src)]) == 0


def test_check_tree_format_is_json(tmp_path, capsys):
    src = _copy(tmp_path, "counter.ebm")
    assert main(["check", str(src), "--int-range", "0..1",
                 "--format", "tree"]) == 0
    tree = json.loads(capsys.readouterr().out)
    assert tree["overall"] == "PASS"
    assert [v["name"] for v in tree["verdicts"]] == ["initialisation", "incr"]


def test_check_fail_maps_to_exit_1(tmp_path, capsys, monkeypatch):
    # an honest translation never fails containment, so fake one verdict
    import eb2jml.cli as cli
    from eb2jml.checker import Report, Verdict

    def fake_check(machine, universe, unit, witness_cap=5):
        return Report(machine=machine.name, universe=universe,
                      verdicts=(Verdict(name="incr", status="FAIL",
                                        checked_pairs=1),),
                      elapsed=0.0)

    monkeypatch.setattr(cli, "check_machine", fake_check)
    src = _copy(tmp_path, "counter.ebm")
    assert main(["check", str(src)]) == 1


def test_parse_prints_canonical_form(tmp_path, capsys):
    src = _copy(tmp_path, "counter.ebm")
    assert main(["parse", str(src)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("machine counter")
    assert "v : INT" in out


def test_parse_empty_file(tmp_path, capsys):
    src = tmp_path / "empty.ebm"
    src.write_text("")
    assert main(["parse", str(src)]) == 2
    assert "machine" in capsys.readouterr().err


def test_parse_error_cites_line(tmp_path, capsys):
    src = tmp_path / "broken.ebm"
    src.write_text("machine m\nvariables v\ninvariants\n  i1: v : INT\n"
                   "events\n  initialisation\n    begin\n      a1: v 0\n"
                   "    end\nend\n")
    assert main(["parse", str(src)]) == 2
    assert "8:" in capsys.readouterr().err


def test_bad_universe_flags(tmp_path, capsys):
    src = _copy(tmp_path, "counter.ebm")
    assert main(["check", str(src), "--int-range", "nope"]) == 2
    assert main(["check", str(src), "--carrier", "PERSON"]) == 2
    assert main(["check", str(src), "--int-range", "3..1"]) == 2
