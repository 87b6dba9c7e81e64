"""Corpus loading: manifests, gold labels, page sampling, case files.

A corpus is a directory of HTML files described by a JSON manifest. Each
(website, attribute) pair becomes one test case: up to ``sample_n`` pages
drawn without replacement (the same page sample is shared by all attributes
of a website), the instruction assembled from the domain preamble plus the
attribute prompt, and per-page gold value sets with character references
normalized the same way page text is.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .dom import normalize_escapes


class DatasetError(Exception):
    """Base class for corpus loading failures."""


class MissingGold(DatasetError):
    """No gold table for a (website, attribute) pair."""


class MissingTemplate(DatasetError):
    """No instruction template for a (domain, attribute) pair."""


class SchemaViolation(DatasetError):
    """A case or manifest record does not match the expected schema."""


#: Built-in instruction templates per domain: preamble plus one prompt per
#: attribute. Manifests may override or extend these.
INSTRUCTIONS: dict[str, tuple[str, dict[str, str]]] = {
    "auto": (
        "Here's a webpage with detailed information about an auto.",
        {
            "model": "Please extract the model of the auto.",
            "price": "Please extract the price of the auto.",
            "engine": "Please extract the engine of the auto.",
            "fuel_economy": "Please extract the fuel efficiency of the auto.",
        },
    ),
    "book": (
        "Here's a webpage with detailed information about a book.",
        {
            "title": "Please extract the title of the book.",
            "author": "Please extract the author of the book.",
            "isbn_13": "Please extract the isbn number of the book.",
            "publisher": "Please extract the publisher of the book.",
            "publication_date": "Please extract the publication date of the book.",
        },
    ),
    "camera": (
        "Here's a webpage with detail information of camera.",
        {
            "model": "Please extract the product name of the camera.",
            "price": "Please extract the sale price of the camera.",
            "manufacturer": "Please extract the manufacturer of the camera.",
        },
    ),
    "job": (
        "Here's a webpage with detailed information about a job.",
        {
            "title": "Please extract the title of the job.",
            "company": "Please extract the name of the company that offers the job.",
            "location": "Please extract the working location of the job.",
            "date_posted": "Please extract the date that post the job.",
        },
    ),
    "movie": (
        "Here's a webpage with detailed information about a movie.",
        {
            "title": "Please extract the title of the movie.",
            "director": "Please extract the director of the movie.",
            "genre": "Please extract the genre of the movie.",
            "mpaa_rating": "Please extract the MPAA rating of the movie.",
        },
    ),
    "nbaplayer": (
        "Here's a webpage with detailed information about an NBA player.",
        {
            "name": "Please extract the name of the player.",
            "team": "Please extract the team of the player he plays now.",
            "height": "Please extract the height of the player.",
            "weight": "Please extract the weight of the player.",
        },
    ),
    "restaurant": (
        "Here's a webpage with detailed information about a restaurant.",
        {
            "name": "Please extract the restaurant's name.",
            "address": "Please extract the restaurant's address.",
            "phone": "Please extract the restaurant's phone number.",
            "cuisine": "Please extract the cuisine that the restaurant offers.",
        },
    ),
    "university": (
        "Here's a webpage on detailed information about a university.",
        {
            "name": "Please extract the name of the university.",
            "phone": "Please extract the contact phone number of the university.",
            "website": "Please extract the website url of the university.",
            "type": "Please extract the type of the university.",
        },
    ),
}


@dataclass(frozen=True)
class PageRecord:
    page_id: str
    html_path: str  # relative to the corpus root
    gold: tuple[str, ...]

    def to_record(self) -> dict:
        return {
            "page_id": self.page_id,
            "html_path": self.html_path,
            "gold": list(self.gold),
        }


@dataclass(frozen=True)
class WebpageCase:
    domain: str
    website: str
    attribute: str
    instruction: str
    pages: tuple[PageRecord, ...]

    @property
    def case_id(self) -> str:
        return f"{self.domain}__{self.website}__{self.attribute}"

    @property
    def page_ids(self) -> tuple[str, ...]:
        return tuple(p.page_id for p in self.pages)

    def to_record(self) -> dict:
        return {
            "domain": self.domain,
            "website": self.website,
            "attribute": self.attribute,
            "instruction": self.instruction,
            "pages": [p.to_record() for p in self.pages],
        }


@dataclass
class WebsiteEntry:
    pages: dict[str, str]  # page id -> html path relative to root
    gold: dict[str, dict[str, list[str]]]  # attribute -> page id -> values


@dataclass
class CorpusManifest:
    root: Path
    domains: dict[str, dict[str, WebsiteEntry]]  # domain -> website -> entry
    preambles: dict[str, str]
    prompts: dict[str, dict[str, str]]
    checksums: dict[str, str]

    @classmethod
    def load(cls, path: str | Path) -> "CorpusManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"manifest is not valid JSON: {exc}") from exc
        if "domains" not in raw or not isinstance(raw["domains"], dict):
            raise SchemaViolation("manifest must carry a 'domains' object")
        root = path.parent
        domains: dict[str, dict[str, WebsiteEntry]] = {}
        preambles: dict[str, str] = {}
        prompts: dict[str, dict[str, str]] = {}
        checksums: dict[str, str] = raw.get("checksums", {})
        for domain, spec in raw["domains"].items():
            if "preamble" in spec:
                preambles[domain] = spec["preamble"]
            if "attributes" in spec:
                prompts[domain] = dict(spec["attributes"])
            websites: dict[str, WebsiteEntry] = {}
            for website, wspec in spec.get("websites", {}).items():
                pages = dict(wspec.get("pages", {}))
                gold = wspec.get("gold", {})
                if isinstance(gold, str):
                    gold_path = root / gold
                    if not gold_path.exists():
                        raise MissingGold(f"gold file {gold_path} does not exist")
                    gold = json.loads(gold_path.read_text(encoding="utf-8"))
                websites[website] = WebsiteEntry(pages=pages, gold=gold)
            domains[domain] = websites
        manifest = cls(root, domains, preambles, prompts, checksums)
        manifest.verify_files()
        return manifest

    def verify_files(self) -> None:
        for domain, websites in self.domains.items():
            for website, entry in websites.items():
                for page_id, rel in entry.pages.items():
                    full = self.root / rel
                    if not full.exists():
                        raise SchemaViolation(
                            f"page file missing: {rel} ({domain}/{website}/{page_id})"
                        )
                    if rel in self.checksums:
                        digest = hashlib.sha256(full.read_bytes()).hexdigest()
                        if digest != self.checksums[rel]:
                            raise SchemaViolation(f"checksum mismatch for {rel}")

    def instruction_for(self, domain: str, attribute: str) -> str:
        builtin = INSTRUCTIONS.get(domain)
        preamble = self.preambles.get(domain) or (builtin[0] if builtin else None)
        prompt = (self.prompts.get(domain) or {}).get(attribute)
        if prompt is None and builtin:
            prompt = builtin[1].get(attribute)
        if not preamble or not prompt:
            raise MissingTemplate(f"no instruction template for {domain}/{attribute}")
        return f"{preamble} {prompt}"


def derive_seed(base_seed: int, *parts: str) -> int:
    """Stable sub-seed for a named stream (never ``hash()``: not stable)."""
    digest = hashlib.sha256(
        ("\x1f".join([str(base_seed), *parts])).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big")


def build_cases(
    manifest: CorpusManifest,
    sample_n: int = 100,
    rng_seed: int = 0,
) -> list[WebpageCase]:
    """One case per (website, attribute); page samples shared per website."""
    cases: list[WebpageCase] = []
    for domain in sorted(manifest.domains):
        websites = manifest.domains[domain]
        for website in sorted(websites):
            entry = websites[website]
            page_ids = sorted(entry.pages)
            take = min(sample_n, len(page_ids))
            rng = random.Random(derive_seed(rng_seed, domain, website))
            sampled = sorted(rng.sample(page_ids, take))
            attributes = sorted(entry.gold) or []
            if not attributes:
                raise MissingGold(f"no gold tables for {domain}/{website}")
            for attribute in attributes:
                instruction = manifest.instruction_for(domain, attribute)
                table = entry.gold.get(attribute)
                if table is None:
                    raise MissingGold(f"no gold for {domain}/{website}/{attribute}")
                pages = tuple(
                    PageRecord(
                        page_id=pid,
                        html_path=entry.pages[pid],
                        gold=tuple(normalize_escapes(v) for v in table.get(pid, [])),
                    )
                    for pid in sampled
                )
                cases.append(WebpageCase(domain, website, attribute, instruction, pages))
    return cases


_CASE_KEYS = {"domain", "website", "attribute", "instruction", "pages"}
_PAGE_KEYS = {"page_id", "html_path", "gold"}


def case_from_record(record: dict) -> WebpageCase:
    if not isinstance(record, dict) or not _CASE_KEYS.issubset(record):
        missing = _CASE_KEYS - set(record) if isinstance(record, dict) else _CASE_KEYS
        raise SchemaViolation(f"case record missing keys: {sorted(missing)}")
    pages = []
    for page in record["pages"]:
        if not isinstance(page, dict) or not _PAGE_KEYS.issubset(page):
            missing = _PAGE_KEYS - set(page) if isinstance(page, dict) else _PAGE_KEYS
            raise SchemaViolation(f"page record missing keys: {sorted(missing)}")
        pages.append(PageRecord(page["page_id"], page["html_path"], tuple(page["gold"])))
    return WebpageCase(
        domain=record["domain"],
        website=record["website"],
        attribute=record["attribute"],
        instruction=record["instruction"],
        pages=tuple(pages),
    )


def dump_json(record, path: str | Path) -> None:
    """Canonical JSON writer shared by every artifact for byte-stable files."""
    Path(path).write_text(
        json.dumps(record, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def save_case(case: WebpageCase, path: str | Path) -> None:
    dump_json(case.to_record(), path)


def load_case(path: str | Path) -> WebpageCase:
    try:
        record = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"case file is not valid JSON: {exc}") from exc
    return case_from_record(record)
