import pytest

from wrapsmith.dom import measure, parse_html
from wrapsmith.executor import (
    ActionSequence,
    ExtractionStatus,
    FragilityConfig,
    InvalidXPathError,
    NoMatchError,
    NotAnElementError,
    Provenance,
    classify_predicates,
    classify_sequence,
    eval_node,
    eval_text,
    extract,
    normalize_value,
    normalize_values,
    prune,
    run_sequence,
)

PROV = Provenance("seed-1", "progressive")


def seq(*steps):
    return ActionSequence(tuple(steps), PROV)


class TestEvalText:
    def test_following_sibling_value(self):
        tree = parse_html("<div class='a'><b>Height:</b> 6-9 </div>", "t")
        result = eval_text(tree, "//div[@class='a']/b/following-sibling::text()")
        assert result.ok and result.values == ("6-9",)

    def test_no_match(self):
        tree = parse_html("<div><p>x</p></div>", "t")
        assert eval_text(tree, "//*[@class='nonexistent']").status is ExtractionStatus.NO_MATCH

    def test_invalid_xpath(self):
        tree = parse_html("<div><p>x</p></div>", "t")
        assert eval_text(tree, "//div[").status is ExtractionStatus.INVALID_XPATH

    def test_element_match_uses_string_value(self):
        tree = parse_html("<div><p>a <b>b</b> c</p></div>", "t")
        assert eval_text(tree, "//p").values == ("a b c",)

    def test_matched_empty_node_gives_ok_and_no_values(self):
        tree = parse_html("<div><p></p></div>", "t")
        result = eval_text(tree, "//p")
        assert result.ok and result.values == ()

    def test_attribute_values(self):
        tree = parse_html('<div class="a"><p class="b">x</p></div>', "t")
        assert eval_text(tree, "//p/@class").values == ("b",)


class TestEvalNode:
    def test_selects_first_element_subtree(self):
        tree = parse_html(
            "<body><div class='x'><p>v</p></div><div class='x'><p>w</p></div></body>", "t"
        )
        sub = eval_node(tree, "//div[@class='x']")
        assert sub.to_html() == '<div class="x"><p>v</p></div>'

    def test_parent_step(self):
        tree = parse_html("<div><span>v</span></div>", "t")
        sub = eval_node(tree, "//div/span/..")
        assert sub.root.tag == "div"

    def test_no_match_raises(self):
        tree = parse_html("<div><p>x</p></div>", "t")
        with pytest.raises(NoMatchError):
            eval_node(tree, "//section")

    def test_text_match_raises_not_an_element(self):
        tree = parse_html("<div><p>x</p></div>", "t")
        with pytest.raises(NotAnElementError):
            eval_node(tree, "//p/text()")

    def test_invalid_raises(self):
        tree = parse_html("<div><p>x</p></div>", "t")
        with pytest.raises(InvalidXPathError):
            eval_node(tree, "//div[")

    def test_root_parent_is_noop_with_signal(self):
        tree = parse_html("<div><p>x</p></div>", "t")
        outcome = prune(tree, "//div/..")
        assert outcome.root_reached
        assert outcome.tree is tree

    def test_metrics_shrink_along_pruning(self):
        tree = parse_html(
            "<html><body><div class='x'><p>v</p></div><p>junk</p></body></html>", "t"
        )
        sub = eval_node(tree, "//div[@class='x']")
        assert measure(sub).token_count < measure(tree).token_count


class TestRunSequence:
    def test_single_step_equals_eval_text(self, player_page):
        expression = "//span[@class='val']/text()"
        assert run_sequence(player_page, seq(expression)) == eval_text(player_page, expression)

    def test_prune_then_extract_matches_compound(self, player_page):
        split = run_sequence(
            player_page, seq("//div[@class='hrow']", "//span[@class='val']/text()")
        )
        compound = eval_text(player_page, "//div[@class='hrow']//span[@class='val']/text()")
        assert split.values == compound.values == ("6-9",)

    def test_failing_prune_reports_step_index(self, player_page):
        result = run_sequence(player_page, seq("//section", "//p/text()"))
        assert result.status is ExtractionStatus.NO_MATCH
        assert result.failed_step == 0

    def test_invalid_step_reports_index(self, player_page):
        result = run_sequence(player_page, seq("//div[@class='hrow']", "//p["))
        assert result.status is ExtractionStatus.INVALID_XPATH
        assert result.failed_step == 1

    def test_empty_sequence_rejected(self, player_page):
        with pytest.raises(ValueError):
            run_sequence(player_page, seq())

    def test_extract_treats_empty_sequence_as_absence(self, player_page):
        result = extract(player_page, seq())
        assert result.ok and result.values == ()

    def test_prefix_trees_shrink_monotonically(self, player_page):
        sequence = seq("//div[@class='stats']", "//div[@class='hrow']", "//span/text()")
        tree = player_page
        tokens = [measure(tree).token_count]
        for step in sequence.pruning_steps:
            tree = eval_node(tree, step)
            tokens.append(measure(tree).token_count)
        assert tokens == sorted(tokens, reverse=True)
        assert run_sequence(player_page, sequence).values == ("6-9",)


class TestSerialization:
    def test_round_trip_bit_exact(self):
        import json

        sequence = seq("//div[@class='x']", "//p/text()")
        record = json.dumps(sequence.to_record(), sort_keys=True)
        rebuilt = ActionSequence.from_record(json.loads(record))
        assert rebuilt == sequence
        assert json.dumps(rebuilt.to_record(), sort_keys=True) == record

    def test_unicode_steps_survive(self):
        sequence = seq("//b[contains(text(),'身長')]")
        rebuilt = ActionSequence.from_record(sequence.to_record())
        assert rebuilt.steps == sequence.steps


class TestClassifyPredicates:
    def test_contains_only(self):
        report = classify_predicates("//b[contains(text(),'Height:')]")
        assert (report.contains_count, report.equal_count) == (1, 0)
        assert not report.fragile

    def test_fragile_phone_literal(self):
        report = classify_predicates("//h5[contains(text(), '703-528-7809')]")
        assert report.contains_count == 1
        assert report.fragile
        assert report.fragile_literals[0].kind == "contains"

    def test_attribute_equality(self):
        report = classify_predicates("//div[@class='a']")
        assert (report.contains_count, report.equal_count) == (0, 1)
        assert not report.fragile

    def test_attribute_literals_never_fragile(self):
        report = classify_predicates("//div[@class='gray200B-dyContent-360004']")
        assert report.equal_count == 1
        assert not report.fragile

    def test_fragile_equal_on_text(self):
        report = classify_predicates("//p[text()='order 123456789']")
        assert report.equal_count == 1
        assert report.fragile_literals[0].kind == "equal"

    def test_long_literal_flagged(self):
        report = classify_predicates(
            "//p[contains(text(),'a very long page specific sentence')]"
        )
        assert report.fragile

    def test_threshold_configurable(self):
        lax = FragilityConfig(min_digit_run=12, max_literal_len=200)
        report = classify_predicates("//h5[contains(text(), '703-528-7809')]", lax)
        assert not report.fragile

    def test_invalid_xpath_raises(self):
        with pytest.raises(InvalidXPathError):
            classify_predicates("//div[")

    def test_sequence_merge(self):
        sequence = seq("//div[@class='a']", "//b[contains(text(),'Height:')]/text()")
        report = classify_sequence(sequence)
        assert (report.contains_count, report.equal_count) == (1, 1)


def test_normalization():
    assert normalize_value("  6-9 \n") == "6-9"
    assert normalize_value("a   b\tc") == "a b c"
    assert normalize_values(["", " ", "x ", "x"]) == ("x", "x")
