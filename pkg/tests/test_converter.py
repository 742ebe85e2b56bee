"""Template-bank conversion of news records into categories."""

import datetime as dt
import logging
import random

import pytest

from crisisbot.aiml import (
    ExpressionCue,
    KnowledgeBase,
    Pattern,
    UrlPush,
    normalize,
    serialize_category,
)
from crisisbot.converter import (
    ConversionSkipped,
    TemplateBank,
    TemplateBankError,
    TemplateSpec,
    UrlSlot,
    convert_all,
    default_bank,
    excerpt,
    instantiate,
    populate,
    resolve_wh,
)
from crisisbot.preprocess import NamedEntity, default_ontology
from crisisbot.repository import NewsRecord

WHO_URL = "http://www.who.int/mediacentre/releases/2004/pr25/en/"
EXCERPT_TEXT = (
    "A rare strain of meningitis, which re-emerged recently in Burkina Faso..."
)

FIG_INSTANCE_WHERE = """<pattern> where _ meningitis _ </pattern>
<template> A rare strain of meningitis, which re-emerged recently in Burkina Faso...
<javascript>
window.open("http://www.who.int/mediacentre/releases/2004/pr25/en/", "", "");
</javascript>
</template>"""

FIG_INSTANCE_WHAT_COUNTRY = """<pattern> what country _ meningitis _ </pattern>
<template> A rare strain of meningitis, which re-emerged recently in Burkina Faso...
<javascript>
window.open("http://www.who.int/mediacentre/releases/2004/pr25/en/","","");
</javascript>
</template>"""


def no_ws(text: str) -> str:
    return "".join(text.split())


def ent(content: str, surface: str, tag: str, weight: float = 1.0) -> NamedEntity:
    start = content.find(surface)
    assert start >= 0, f"{surface!r} not in test content"
    return NamedEntity(surface, tag, (start, start + len(surface)), weight)


def record(
    content: str,
    entities: tuple[NamedEntity, ...],
    *,
    url: str = "http://news.example/story/en/",
    date: dt.date = dt.date(2004, 4, 8),
    title: str = "Sample story",
) -> NewsRecord:
    return NewsRecord(
        url=url,
        date=date,
        title=title,
        content=content,
        entities=entities,
        ingested_at="2004-04-09T00:00:00Z",
    )


def sample_record() -> NewsRecord:
    content = EXCERPT_TEXT
    return record(
        content,
        (
            ent(content, "meningitis", "disease"),
            ent(content, "Burkina Faso", "country"),
        ),
        url=WHO_URL,
        title="New meningitis threat being contained by web of partnerships",
    )


class TestResolveWh:
    def test_country(self):
        assert resolve_wh("country") == ("where", "what country")

    def test_date(self):
        assert resolve_wh("date") == ("when", "what date")

    def test_agent_family(self):
        assert resolve_wh("person") == ("who", "what person")
        assert resolve_wh("organization") == ("who", "what organization")

    def test_disease(self):
        assert resolve_wh("disease") == ("what disease",)

    def test_unknown_tag_rejected(self):
        with pytest.raises(KeyError):
            resolve_wh("planet")


class TestExcerpt:
    def test_single_sentence_with_trailing_ellipsis_kept_whole(self):
        assert excerpt(EXCERPT_TEXT) == EXCERPT_TEXT

    def test_one_plain_sentence_gets_no_suffix(self):
        assert excerpt("Cholera spread quickly.") == "Cholera spread quickly."

    def test_two_sentences_fit_without_suffix(self):
        text = "Cholera spread quickly. Hospitals coped."
        assert excerpt(text) == text

    def test_third_sentence_dropped_with_suffix(self):
        text = (
            "Health officials confirmed that West Nile virus was detected in "
            "migratory birds near Singapore. Hospitals have been asked to "
            "report unusual fevers without delay. The public is advised to "
            "avoid mosquito bites."
        )
        assert excerpt(text) == (
            "Health officials confirmed that West Nile virus was detected in "
            "migratory birds near Singapore. Hospitals have been asked to "
            "report unusual fevers without delay..."
        )

    def test_paragraph_break_collapses_to_one_line(self):
        text = "First report came in.\n\nSecond  report followed. Third arrived."
        assert excerpt(text) == "First report came in. Second report followed..."

    def test_two_paragraph_content_collapses_without_suffix(self):
        text = "First report came in.\n\nSecond report followed."
        assert excerpt(text) == "First report came in. Second report followed."


class TestBankParsing:
    def test_shipped_bank_has_template_a(self):
        bank = default_bank()
        assert len(bank.templates) == 1
        spec = bank.templates[0]
        assert spec.name == "template-a"
        assert spec.pattern_skeleton == ("[wh-token]", "_", "[disease]", "_")
        assert spec.template_skeleton == ("[excerpt]", UrlSlot("[url]"))

    def test_literal_tokens_are_normalized(self):
        bank = TemplateBank.from_string(
            """<templates><category name="t">
            <pattern>Latest [wh-token] _ [disease] _</pattern>
            <template>[excerpt]<javascript>window.open("[url]", "", "");</javascript></template>
            </category></templates>"""
        )
        assert bank.templates[0].pattern_skeleton[0] == "latest"

    def test_cue_survives_parsing(self):
        bank = TemplateBank.from_string(
            """<templates><category name="t">
            <pattern>[wh-token] _ [disease] _</pattern>
            <template><agplay anims="pleased"/>[excerpt]<javascript>window.open("[url]", "", "");</javascript></template>
            </category></templates>"""
        )
        assert bank.templates[0].template_skeleton[0] == ExpressionCue(("pleased",))

    @pytest.mark.parametrize(
        "document, complaint",
        [
            ("not xml <", "well-formed"),
            ("<bank></bank>", "root"),
            ("<templates></templates>", "empty"),
            (
                """<templates><category>
                <pattern>[wh-token] _ [disease] _</pattern>
                <template>[excerpt]<javascript>window.open("[url]", "", "");</javascript></template>
                </category></templates>""",
                "name",
            ),
            (
                """<templates><category name="t"><pattern>[wh-token] _ [disease] _</pattern></category></templates>""",
                "template",
            ),
            (
                """<templates><category name="t">
                <pattern>[wh-token] _</pattern>
                <template>[excerpt]<javascript>window.open("[url]", "", "");</javascript></template>
                </category></templates>""",
                "[disease]",
            ),
            (
                """<templates><category name="t">
                <pattern>[wh-token] _ [disease] _</pattern>
                <template>[excerpt]<javascript>alert("hi");</javascript></template>
                </category></templates>""",
                "window.open",
            ),
            (
                """<templates><category name="t">
                <pattern>[wh-token] _ [disease] _</pattern>
                <template>plain answer<javascript>window.open("[url]", "", "");</javascript></template>
                </category></templates>""",
                "[excerpt]",
            ),
            (
                """<templates><category name="t">
                <pattern>[wh-token] _ [disease] _</pattern>
                <template>[excerpt]<srai>HELLO</srai></template>
                </category></templates>""",
                "srai",
            ),
            (
                """<templates><category name="t">
                <pattern>$$$ [wh-token] _ [disease] _</pattern>
                <template>[excerpt]<javascript>window.open("[url]", "", "");</javascript></template>
                </category></templates>""",
                "unusable",
            ),
        ],
    )
    def test_bad_bank_rejected(self, document, complaint):
        with pytest.raises(TemplateBankError, match=complaint.replace("[", r"\[")):
            TemplateBank.from_string(document)

    def test_duplicate_names_rejected(self):
        category = """<category name="t">
        <pattern>[wh-token] _ [disease] _</pattern>
        <template>[excerpt]<javascript>window.open("[url]", "", "");</javascript></template>
        </category>"""
        with pytest.raises(TemplateBankError, match="duplicate"):
            TemplateBank.from_string(f"<templates>{category}{category}</templates>")


class TestSpecValidation:
    def pattern(self) -> tuple[str, ...]:
        return ("[wh-token]", "_", "[disease]", "_")

    def template(self) -> tuple[object, ...]:
        return ("[excerpt]", UrlSlot("[url]"))

    def test_adjacent_wildcards_rejected(self):
        with pytest.raises(ValueError, match="adjacent"):
            TemplateSpec("t", ("[wh-token]", "_", "_", "[disease]"), self.template())

    def test_double_wh_rejected(self):
        with pytest.raises(ValueError, match="exactly once"):
            TemplateSpec(
                "t", ("[wh-token]", "_", "[wh-token]", "[disease]"), self.template()
            )

    def test_missing_disease_rejected(self):
        with pytest.raises(ValueError, match="exactly once"):
            TemplateSpec("t", ("[wh-token]", "_"), self.template())

    def test_url_inside_text_rejected(self):
        with pytest.raises(ValueError, match="push slot"):
            TemplateSpec(
                "t", self.pattern(), ("[excerpt] [url]", UrlSlot("[url]"))
            )

    def test_slot_without_url_marker_rejected(self):
        with pytest.raises(ValueError, match="exactly once"):
            UrlSlot("http://fixed.example/")

    def test_foreign_part_rejected(self):
        with pytest.raises(ValueError, match="unsupported"):
            TemplateSpec("t", self.pattern(), ("[excerpt]", 42, UrlSlot("[url]")))

    def test_blank_name_rejected(self):
        with pytest.raises(ValueError, match="name"):
            TemplateSpec("  ", self.pattern(), self.template())


class TestInstantiateGolden:
    """The worked meningitis example: one record, two instances."""

    def categories(self):
        bank = default_bank()
        return instantiate(bank.templates[0], sample_record())

    def test_exactly_two_categories(self):
        assert len(self.categories()) == 2

    def test_patterns(self):
        first, second = self.categories()
        assert first.pattern == Pattern(("where", "_", "meningitis", "_"))
        assert second.pattern == Pattern(
            ("what", "country", "_", "meningitis", "_")
        )

    def test_serializations_match_published_instances(self):
        first, second = self.categories()
        want_first = no_ws(f"<category>{FIG_INSTANCE_WHERE}</category>")
        want_second = no_ws(f"<category>{FIG_INSTANCE_WHAT_COUNTRY}</category>")
        assert no_ws(serialize_category(first)) == want_first
        assert no_ws(serialize_category(second)) == want_second

    def test_body_carries_excerpt_and_push(self):
        for category in self.categories():
            assert category.body.text == EXCERPT_TEXT
            assert category.body.push == UrlPush(WHO_URL)

    def test_source_id_is_record_id(self):
        rec = sample_record()
        for category in self.categories():
            assert category.source_id == rec.id


class TestInstantiateRules:
    def spec(self) -> TemplateSpec:
        return default_bank().templates[0]

    def test_sole_disease_uses_disease_wh_form(self):
        content = "Meningitis cases doubled."
        rec = record(content, (ent(content, "Meningitis", "disease"),))
        cats = instantiate(self.spec(), rec)
        assert [c.pattern for c in cats] == [
            Pattern(("what", "disease", "_", "meningitis", "_"))
        ]

    def test_disease_date_country_yields_four(self):
        content = "On 8 April 2004 meningitis hit Burkina Faso."
        rec = record(
            content,
            (
                ent(content, "8 April 2004", "date"),
                ent(content, "meningitis", "disease"),
                ent(content, "Burkina Faso", "country"),
            ),
        )
        cats = instantiate(self.spec(), rec)
        assert [c.pattern.elements for c in cats] == [
            ("when", "_", "meningitis", "_"),
            ("what", "date", "_", "meningitis", "_"),
            ("where", "_", "meningitis", "_"),
            ("what", "country", "_", "meningitis", "_"),
        ]

    def test_no_disease_skips_with_record_id(self):
        content = "Floods reached Jakarta."
        rec = record(content, (ent(content, "Jakarta", "city"),))
        with pytest.raises(ConversionSkipped) as err:
            instantiate(self.spec(), rec)
        assert err.value.record_id == rec.id

    def test_highest_weight_disease_fills_slot(self):
        content = "Both cholera and meningitis were reported."
        rec = record(
            content,
            (
                ent(content, "cholera", "disease", weight=1.0),
                ent(content, "meningitis", "disease", weight=2.5),
                ent(content, "reported", "city"),
            ),
        )
        cats = instantiate(self.spec(), rec)
        assert all("meningitis" in c.pattern.elements for c in cats)

    def test_weight_tie_prefers_leftmost_disease(self):
        content = "Both cholera and meningitis were reported."
        rec = record(
            content,
            (
                ent(content, "cholera", "disease"),
                ent(content, "meningitis", "disease"),
                ent(content, "reported", "city"),
            ),
        )
        cats = instantiate(self.spec(), rec)
        assert all("cholera" in c.pattern.elements for c in cats)

    def test_multiword_disease_becomes_consecutive_literals(self):
        content = "West Nile virus appeared near Singapore."
        rec = record(
            content,
            (
                ent(content, "West Nile virus", "disease"),
                ent(content, "Singapore", "city"),
            ),
        )
        cats = instantiate(self.spec(), rec)
        assert cats[0].pattern.elements == (
            "where", "_", "west", "nile", "virus", "_",
        )

    def test_repeated_tag_repeats_instances(self):
        content = "Geneva and Singapore both saw meningitis."
        rec = record(
            content,
            (
                ent(content, "Geneva", "city"),
                ent(content, "Singapore", "city"),
                ent(content, "meningitis", "disease"),
            ),
        )
        cats = instantiate(self.spec(), rec)
        assert len(cats) == 4
        assert len({c.pattern for c in cats}) == 2

    def test_every_instance_pushes_the_record_url(self):
        rec = sample_record()
        for category in instantiate(self.spec(), rec):
            pushes = [p for p in category.body.parts if isinstance(p, UrlPush)]
            assert [p.url for p in pushes] == [rec.url]


class TestCountLaw:
    """Instances per template equal the sum of wh-forms over entities."""

    TAGS = ("country", "city", "person", "organization", "date")

    def build(self, rng: random.Random) -> NewsRecord:
        tags = [rng.choice(self.TAGS) for _ in range(rng.randint(0, 4))]
        disease = rng.choice(["meningitis", "west nile virus", "sars"])
        words = [disease] + [f"place{i}" for i in range(len(tags))]
        content = "Report about " + " and ".join(words) + "."
        entities = [ent(content, disease, "disease")]
        offset = 0
        for i, tag in enumerate(tags):
            surface = f"place{i}"
            start = content.find(surface, offset)
            entities.append(NamedEntity(surface, tag, (start, start + len(surface)), 1.0))
            offset = start + len(surface)
        entities.sort(key=lambda e: e.span)
        return record(content, tuple(entities), url=f"http://news.example/{rng.random()}")

    def test_random_records_obey_the_law(self):
        rng = random.Random(401)
        onto = default_ontology()
        spec = default_bank().templates[0]
        for _ in range(80):
            rec = self.build(rng)
            others = [e for e in rec.entities if e.tag != "disease"]
            if others:
                want = sum(len(onto.wh_tokens(e.tag)) for e in others)
            else:
                want = len(onto.wh_tokens("disease"))
            assert len(instantiate(spec, rec, onto)) == want


class TestConvertAll:
    def test_empty_is_empty(self):
        assert convert_all([]) == []

    def test_newest_record_first_and_skips_logged(self, caplog):
        old_content = "A rare strain of meningitis, which re-emerged recently in Burkina Faso..."
        old = record(
            old_content,
            (
                ent(old_content, "meningitis", "disease"),
                ent(old_content, "Burkina Faso", "country"),
            ),
            url="http://news.example/old/en/",
            date=dt.date(2004, 4, 8),
        )
        new_content = "Sars reached Singapore."
        new = record(
            new_content,
            (
                ent(new_content, "Sars", "disease"),
                ent(new_content, "Singapore", "city"),
            ),
            url="http://news.example/new/en/",
            date=dt.date(2004, 5, 11),
        )
        bare_content = "Floods reached Jakarta."
        bare = record(
            bare_content,
            (ent(bare_content, "Jakarta", "city"),),
            url="http://news.example/bare/en/",
            date=dt.date(2004, 6, 1),
        )
        with caplog.at_level(logging.INFO, logger="crisisbot.converter"):
            cats = convert_all([old, bare, new])
        assert [c.source_id for c in cats] == [new.id] * 2 + [old.id] * 2
        assert any(bare.id in message for message in caplog.messages)

    def test_total_is_sum_over_records(self):
        rng = random.Random(402)
        builder = TestCountLaw()
        records = [builder.build(rng) for _ in range(30)]
        spec = default_bank().templates[0]
        want = sum(len(instantiate(spec, rec)) for rec in records)
        assert len(convert_all(records)) == want


class TestPopulate:
    def test_golden_pair_answers_where_question(self):
        kb = KnowledgeBase()
        cats = instantiate(default_bank().templates[0], sample_record())
        assert populate(kb, cats) == 2
        result = kb.match(normalize("Where did meningitis re-emerge?"))
        assert result is not None
        assert result.category.body.text == EXCERPT_TEXT
        assert result.category.body.push == UrlPush(WHO_URL)
        other = kb.match(normalize("what country does meningitis threaten"))
        assert other is not None
        assert other.category.pattern.elements[:2] == ("what", "country")

    def test_empty_counts_zero(self):
        kb = KnowledgeBase()
        assert populate(kb, []) == 0
        assert len(kb) == 0

    def test_repopulating_leaves_size_unchanged(self):
        kb = KnowledgeBase()
        cats = instantiate(default_bank().templates[0], sample_record())
        populate(kb, cats)
        size = len(kb)
        assert populate(kb, cats) == len(cats)
        assert len(kb) == size

    def test_later_duplicate_pattern_wins(self):
        content_a = "Meningitis struck Geneva."
        content_b = "Meningitis returned to Geneva."
        first = record(
            content_a,
            (
                ent(content_a, "Meningitis", "disease"),
                ent(content_a, "Geneva", "city"),
            ),
            url="http://news.example/a/en/",
        )
        second = record(
            content_b,
            (
                ent(content_b, "Meningitis", "disease"),
                ent(content_b, "Geneva", "city"),
            ),
            url="http://news.example/b/en/",
        )
        spec = default_bank().templates[0]
        kb = KnowledgeBase()
        populate(kb, instantiate(spec, first) + instantiate(spec, second))
        result = kb.match(normalize("where is meningitis now"))
        assert result is not None
        assert result.category.source_id == second.id
