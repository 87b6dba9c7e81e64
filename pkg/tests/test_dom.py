import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_page_html
from wrapsmith.dom import (
    CommentNode,
    EmptyInput,
    ParseFailure,
    canonical_serialization,
    measure,
    normalize_escapes,
    parse_html,
    preprocess,
)


class TestParse:
    def test_single_paragraph(self):
        tree = parse_html("<html><body><p>x</p></body></html>", "t")
        body = tree.root.element_children[0]
        p = body.element_children[0]
        assert tree.root.tag == "html"
        assert p.tag == "p"
        assert p.children == p.children and p.text_content() == "x"

    def test_unclosed_div_recovers_nesting(self):
        tree = parse_html('<div class="a"><div>y</div>', "t")
        assert tree.root.tag == "div"
        assert tree.root.class_attr == "a"
        inner = tree.root.element_children[0]
        assert inner.tag == "div"
        assert inner.text_content() == "y"

    def test_blank_input_rejected(self):
        with pytest.raises(EmptyInput):
            parse_html("", "t")
        with pytest.raises(EmptyInput):
            parse_html("   \n\t ", "t")

    def test_text_only_input_rejected(self):
        with pytest.raises(ParseFailure):
            parse_html("just words, no markup", "t")

    def test_multiple_top_level_elements_get_wrapped(self):
        tree = parse_html("<p>a</p><p>b</p>", "t")
        assert tree.root.tag == "html"
        assert [el.tag for el in tree.root.element_children] == ["p", "p"]

    def test_stray_end_tag_ignored(self):
        tree = parse_html("<div><p>a</p></span></div>", "t")
        assert tree.root.tag == "div"
        assert tree.root.text_content() == "a"

    def test_mis_nested_end_tag_closes_up_to_match(self):
        tree = parse_html("<div><b>x</div>tail", "t")
        assert tree.root.tag == "html"  # div plus loose tail text
        div = tree.root.element_children[0]
        assert div.element_children[0].tag == "b"

    def test_entities_resolved_at_parse(self):
        tree = parse_html("<p>a &amp; b</p>", "t")
        assert tree.root.text_content() == "a & b"

    def test_void_elements_do_not_swallow_siblings(self):
        tree = parse_html("<p>a<br>b</p>", "t")
        assert tree.root.text_content() == "ab"
        assert [el.tag for el in tree.root.element_children] == ["br"]

    def test_comments_survive_parse(self):
        tree = parse_html("<div><!-- note --><p>x</p></div>", "t")
        kinds = [type(c).__name__ for c in tree.root.children]
        assert "CommentNode" in kinds

    def test_round_trip_same_structure(self):
        raw = '<div class="a">x<span>y</span>z</div>'
        tree = parse_html(raw, "t")
        again = parse_html(tree.to_html(), "t")
        assert tree.structurally_equal(again)


class TestPreprocess:
    def test_script_and_style_removed(self):
        tree = parse_html(
            "<html><head><style>.x{}</style></head>"
            "<body><script>var a=1;</script><p>x</p></body></html>",
            "t",
        )
        clean = preprocess(tree)
        assert all(el.tag not in ("script", "style") for el in clean.iter_elements())
        assert clean.text_content() == "x"

    def test_only_class_attribute_kept(self):
        tree = parse_html('<div id="a" class="b" style="c"><p title="q">x</p></div>', "t")
        clean = preprocess(tree)
        assert clean.root.attrs == (("class", "b"),)
        assert clean.root.element_children[0].attrs == ()

    def test_multi_class_string_kept_verbatim(self):
        clean = preprocess(parse_html('<div class="a b  c">x</div>', "t"))
        assert clean.root.class_attr == "a b  c"

    def test_comments_dropped(self):
        clean = preprocess(parse_html("<div><!-- note --><p>x</p></div>", "t"))
        assert all(not isinstance(n, CommentNode) for n in clean.iter_nodes())

    def test_idempotent(self):
        tree = parse_html(
            '<div id="i" class="c"><script>s</script><p>a &amp; b<!--x--></p></div>', "t"
        )
        once = preprocess(tree)
        twice = preprocess(once)
        assert once.structurally_equal(twice)

    def test_never_grows_metrics(self):
        tree = parse_html(
            '<div id="i" class="c"><script>var long = "script body";</script>'
            "<p>a</p><style>.q{}</style></div>",
            "t",
        )
        before = measure(tree)
        after = measure(preprocess(tree))
        assert after.token_count <= before.token_count
        assert after.height <= before.height

    def test_original_tree_untouched(self):
        tree = parse_html('<div id="a"><script>s</script><p>x</p></div>', "t")
        tags_before = [el.tag for el in tree.iter_elements()]
        preprocess(tree)
        assert [el.tag for el in tree.iter_elements()] == tags_before


class TestMeasure:
    def test_single_element_tokens_and_height(self):
        tree = parse_html("<p>hi</p>", "t")
        metrics = measure(tree)
        assert canonical_serialization(tree) == "<p> hi </p>"
        assert metrics.token_count == 3
        assert metrics.height == 1

    def test_empty_body_document(self):
        metrics = measure(parse_html("<body></body>", "t"))
        assert metrics.height == 1
        assert metrics.token_count == 2  # <body> </body>

    def test_height_counts_elements_only(self):
        tree = parse_html("<div><p>deep text here</p></div>", "t")
        assert measure(tree).height == 2

    def test_subtree_never_larger(self):
        tree = parse_html(
            '<html><body><div class="x"><p>v</p><p>w</p></div><p>t</p></body></html>', "t"
        )
        whole = measure(tree)
        for el in tree.iter_elements():
            sub = measure(tree.subtree(el))
            assert sub.token_count <= whole.token_count
            assert sub.height <= whole.height

    def test_multiclass_attribute_tokens(self):
        # class="a b" splits on whitespace: <div + class="a + b"> = 3 tokens.
        assert measure(parse_html('<div class="a b">x</div>', "t")).token_count == 5


class TestSubtree:
    def test_subtree_is_fresh_copy(self):
        tree = parse_html('<div><span class="s">x</span></div>', "t")
        span = next(el for el in tree.iter_elements() if el.tag == "span")
        sub = tree.subtree(span)
        assert sub.root is not span
        assert sub.root.parent is None
        assert sub.to_html() == '<span class="s">x</span>'

    def test_subtree_nodes_subset_of_source(self):
        tree = parse_html("<div><p>a</p><p>b</p></div>", "t")
        source_ids = {id(n) for n in tree.iter_nodes()}
        p = tree.root.element_children[0]
        for node in tree.subtree(p).iter_nodes():
            assert id(node) not in source_ids  # copies, not aliases


def test_normalize_escapes():
    assert normalize_escapes("a &amp; b") == "a & b"
    assert normalize_escapes("6&#45;9") == "6-9"
    assert normalize_escapes("plain") == "plain"


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_preprocess_idempotent_and_monotone_on_random_pages(seed):
    rng = random.Random(seed)
    tree = parse_html(random_page_html(rng), f"fuzz-{seed}")
    once = preprocess(tree)
    assert once.structurally_equal(preprocess(once))
    before, after = measure(tree), measure(once)
    assert after.token_count <= before.token_count
    assert after.height <= before.height
