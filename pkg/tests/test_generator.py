from __future__ import annotations

import hashlib
import random

import pytest

from fmgen.config import Conflict, Configuration, apply_decision, finalize, init_config, parse_decisions
from fmgen.frames import parse_frames
from fmgen.generator import (
    FILLS_FILENAME,
    MANIFEST_FILENAME,
    SPEC_FILENAME,
    GenerateError,
    RuleError,
    generate,
    parse_rules,
    roundtrip_update,
    serialize_rules,
)
from fmgen.specxml import InvalidConfigurationError, SpecError, emit_spec, emit_spec_preview, parse_spec

from conftest import FIXTURES, GOLDENS
from oracles import MaskModel, random_diagram


@pytest.fixture(scope="module")
def view_library():
    return parse_frames((FIXTURES / "view.frame").read_text())


@pytest.fixture(scope="module")
def view_rules(view_diagram, view_library):
    return parse_rules((FIXTURES / "view.rules").read_text(), view_diagram, view_library)


def configured(diagram, decision_file: str, policy: str = "default-off"):
    c = init_config(diagram)
    for feature, value in parse_decisions((FIXTURES / decision_file).read_text()):
        outcome = apply_decision(c, feature, value)
        assert not isinstance(outcome, Conflict)
        c = outcome[0]
    final = finalize(c, policy)
    assert not isinstance(final, Conflict)
    return final


class TestSpecXml:
    def test_golden(self, view_diagram):
        c = configured(view_diagram, "view_all.dec")
        assert emit_spec(c) == (GOLDENS / "spec_view_all.xml").read_text()

    def test_zoom_only_values(self, view_diagram):
        c = configured(view_diagram, "view_zoom.dec")
        text = emit_spec(c)
        assert '<feature name="Zoom" value="1">' in text
        for level in ("Zoom25", "Zoom75", "Zoom100", "Zoom150"):
            assert f'<feature name="{level}" value="0"/>' in text

    def test_roundtrip_identity(self, view_diagram):
        c = configured(view_diagram, "view_all.dec")
        back = parse_spec(emit_spec(c), view_diagram)
        assert back.derived_state == c.derived_state
        assert emit_spec(back) == emit_spec(c)

    def test_roundtrip_random_complete_configurations(self):
        rng = random.Random(50)
        done = 0
        while done < 60:
            d = random_diagram(rng, rng.randint(1, 12))
            mm = MaskModel(d)
            valid = mm.valid_masks()
            if not valid:
                continue
            mask = rng.choice(valid)
            assignment = {n: bool(mask >> i & 1) for n, i in mm.index.items()}
            from fmgen.config import derive_states

            c = Configuration(d, assignment, derive_states(d, assignment))
            back = parse_spec(emit_spec(c), d)
            assert back.derived_state == c.derived_state
            done += 1

    def test_incomplete_configuration_rejected(self, view_diagram):
        with pytest.raises(InvalidConfigurationError):
            emit_spec(init_config(view_diagram))

    def test_preview_marks_undecided(self, view_diagram):
        text = emit_spec_preview(init_config(view_diagram))
        assert 'name="View" value="?"' in text
        assert 'name="Main" value="1"' in text

    def test_invalid_assignment_names_or_group(self, view_diagram):
        c = configured(view_diagram, "view_all.dec")
        text = emit_spec(c)
        for name in ("ToolBarCheck", "StatusBar", "Zoom", "Zoom25", "Zoom75", "Zoom100", "Zoom150"):
            text = text.replace(f'name="{name}" value="1"', f'name="{name}" value="0"')
        with pytest.raises(InvalidConfigurationError) as err:
            parse_spec(text, view_diagram)
        assert any(ob.kind == "or-group" and ob.subject == "View" for ob in err.value.obligations)

    def test_missing_feature_rejected(self, view_diagram):
        c = configured(view_diagram, "view_all.dec")
        text = emit_spec(c).replace('      <feature name="StatusBar" value="1"/>\n', "")
        with pytest.raises(SpecError, match="missing feature 'StatusBar'"):
            parse_spec(text, view_diagram)

    def test_unknown_feature_rejected(self, view_diagram):
        c = configured(view_diagram, "view_all.dec")
        text = emit_spec(c).replace('name="StatusBar"', 'name="SideBar"')
        with pytest.raises(SpecError, match="unknown feature"):
            parse_spec(text, view_diagram)

    def test_malformed_xml(self, view_diagram):
        with pytest.raises(SpecError, match="malformed XML"):
            parse_spec("<specification", view_diagram)


class TestRules:
    def test_fixture_parses(self, view_rules):
        assert [o.target for o in view_rules.outputs] == ["app/menu.cfg", "app/window.cfg"]
        menu_rule = view_rules.outputs[0]
        assert menu_rule.root_frame == "AppMenu"
        assert menu_rule.markers.comment_prefix == "#"
        assert menu_rule.actions[0].guard == ("View", True)
        assert menu_rule.actions[0].call.frame == "ViewMenu"

    def test_unconditional_action(self):
        rules = parse_rules('output a.txt root F markers #\nfill s with text "x"\n')
        assert rules.outputs[0].actions[0].guard is None

    def test_guard_on_zero(self, view_rules):
        window_rule = view_rules.outputs[1]
        assert window_rule.actions[1].guard == ("View", False)

    def test_duplicate_target_rejected(self):
        source = "output a.txt root F markers #\noutput a.txt root F markers #\n"
        with pytest.raises(RuleError, match="duplicate target"):
            parse_rules(source)

    def test_traversal_rejected(self):
        with pytest.raises(RuleError, match="relative"):
            parse_rules("output ../evil root F markers #\n")
        with pytest.raises(RuleError, match="relative"):
            parse_rules("output /abs root F markers #\n")

    def test_unknown_frame_binding(self, view_diagram, view_library):
        with pytest.raises(RuleError, match="unknown frame"):
            parse_rules("output a.txt root Ghost markers #\n", view_diagram, view_library)

    def test_unknown_feature_binding(self, view_diagram, view_library):
        source = 'output a.txt root AppMenu markers #\nwhen Ghost = 1 : fill menus with text "x"\n'
        with pytest.raises(RuleError, match="unknown feature"):
            parse_rules(source, view_diagram, view_library)

    def test_unknown_slot_binding(self, view_diagram, view_library):
        source = 'output a.txt root AppMenu markers #\nfill ghost with text "x"\n'
        with pytest.raises(RuleError, match="no slot"):
            parse_rules(source, view_diagram, view_library)

    def test_serialize_roundtrip(self, view_rules):
        assert parse_rules(serialize_rules(view_rules)) == view_rules


class TestGenerate:
    def test_all_selected_golden(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        generate(view_diagram, c, view_library, view_rules, tmp_path)
        assert (tmp_path / "app/menu.cfg").read_text() == (GOLDENS / "menu_all.cfg").read_text()
        assert (tmp_path / "app/window.cfg").read_text() == (GOLDENS / "window_all.cfg").read_text()
        lines = (tmp_path / "app/menu.cfg").read_text().splitlines()
        begin = lines.index("# BEGIN-FRAME AppMenu/menus[0]:ViewMenu")
        end = lines.index("# END-FRAME AppMenu/menus[0]:ViewMenu")
        view_region = "\n".join(lines[begin:end])
        assert 'item "ToolBar"' in view_region
        assert 'item "StatusBar"' in view_region
        assert 'popup "Zoom"' in view_region

    def test_gating_no_view_region(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_off.dec")
        generate(view_diagram, c, view_library, view_rules, tmp_path)
        menu = (tmp_path / "app/menu.cfg").read_text()
        marker_paths = [
            line.split("BEGIN-FRAME ", 1)[1]
            for line in menu.splitlines()
            if "BEGIN-FRAME" in line
        ]
        assert all("ViewMenu" not in p for p in marker_paths)
        assert "ToolBar" not in menu

    def test_determinism(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        first = tmp_path / "one"
        second = tmp_path / "two"
        m1 = generate(view_diagram, c, view_library, view_rules, first)
        m2 = generate(view_diagram, c, view_library, view_rules, second)
        assert m1 == m2
        for rel in [e[0] for e in m1.entries] + [MANIFEST_FILENAME, FILLS_FILENAME]:
            assert (first / rel).read_bytes() == (second / rel).read_bytes()

    def test_manifest_integrity(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        manifest = generate(view_diagram, c, view_library, view_rules, tmp_path)
        listed = {path for path, _, _ in manifest.entries}
        assert SPEC_FILENAME in listed
        on_disk = {
            str(p.relative_to(tmp_path))
            for p in tmp_path.rglob("*")
            if p.is_file() and p.name not in (MANIFEST_FILENAME, FILLS_FILENAME)
        }
        assert on_disk == listed
        for path, size, digest in manifest.entries:
            data = (tmp_path / path).read_bytes()
            assert len(data) == size
            assert hashlib.sha256(data).hexdigest() == digest
        manifest_text = (tmp_path / MANIFEST_FILENAME).read_text()
        assert manifest_text == manifest.render()
        assert manifest_text.startswith("inputs\t")

    def test_incomplete_configuration_rejected(self, view_diagram, view_library, view_rules, tmp_path):
        with pytest.raises(InvalidConfigurationError):
            generate(view_diagram, init_config(view_diagram), view_library, view_rules, tmp_path)

    def test_spec_written_alongside(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        generate(view_diagram, c, view_library, view_rules, tmp_path)
        assert (tmp_path / SPEC_FILENAME).read_text() == emit_spec(c)


class TestRoundtrip:
    def test_unedited_tree_empty_report(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        generate(view_diagram, c, view_library, view_rules, tmp_path)
        report = roundtrip_update(tmp_path, view_library, view_rules)
        assert report.differences == ()

    def test_edit_reported_and_preserved(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        generate(view_diagram, c, view_library, view_rules, tmp_path / "a")
        menu_path = tmp_path / "a" / "app/menu.cfg"
        menu_path.write_text(menu_path.read_text().replace('item "100%"', 'item "one hundred"'))
        report = roundtrip_update(tmp_path / "a", view_library, view_rules)
        assert len(report.differences) == 1
        diff = report.differences[0]
        assert diff.kind == "changed"
        assert diff.target == "app/menu.cfg"
        assert "levels[2]:MenuItem/label[0]" in diff.key
        assert diff.current == "one hundred"
        regenerated = generate(
            view_diagram, c, view_library, view_rules, tmp_path / "b", overlay=report.overlay()
        )
        assert 'item "one hundred"' in (tmp_path / "b" / "app/menu.cfg").read_text()
        assert regenerated.entries != ()

    def test_marker_corruption_names_file(self, view_diagram, view_library, view_rules, tmp_path):
        c = configured(view_diagram, "view_all.dec")
        generate(view_diagram, c, view_library, view_rules, tmp_path)
        menu_path = tmp_path / "app/menu.cfg"
        menu_path.write_text(
            "\n".join(
                line for line in menu_path.read_text().splitlines() if "END-FRAME" not in line
            ) + "\n"
        )
        with pytest.raises(GenerateError, match="app/menu.cfg"):
            roundtrip_update(tmp_path, view_library, view_rules)

    def test_roundtrip_requires_fill_record(self, view_library, view_rules, tmp_path):
        with pytest.raises(GenerateError, match="run generate first"):
            roundtrip_update(tmp_path, view_library, view_rules)
