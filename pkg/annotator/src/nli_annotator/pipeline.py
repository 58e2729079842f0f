"""Annotation backends.

The builtin backend is a deterministic rule pipeline: a regex tokenizer
that keeps e-mail addresses and URLs whole, a sentence splitter, an
ordered-rule fine-grained POS tagger, a rule lemmatizer, a gazetteer plus
capitalization named-entity recognizer emitting BIO tags, and a flat
single-root dependency attacher. It trades tag accuracy for having no
model downloads and byte-identical reruns.

The spacy backend wraps an installed spaCy model and maps its annotation
layers onto the same document type.
"""

from __future__ import annotations

import re
from typing import Protocol

from nlikit.corpus import ROOT, AnnotatedDocument, TokenAnnotation

from . import PipelineError

EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}")
URL_RE = re.compile(r"(?:https?://|www\.)[A-Za-z0-9./%+?=&#_~-]*[A-Za-z0-9/]")
TOKEN_RE = re.compile(
    rf"""{EMAIL_RE.pattern}
      | {URL_RE.pattern}
      | [A-Za-z]+(?:'[A-Za-z]+)*
      | \d+(?:[.,]\d+)*
      | [^\w\s]
    """,
    re.VERBOSE,
)

SENTENCE_END = frozenset(".!?")

DETERMINERS = frozenset("the a an this that these those".split())
PRONOUNS = frozenset("i you he she it we they me him her us them".split())
POSSESSIVES = frozenset("my your his its our their".split())
PREPOSITIONS = frozenset(
    "in on at of for with from by about as into over under after before "
    "between during against without through".split()
)
CONJUNCTIONS = frozenset("and or but nor yet".split())
MODALS = frozenset("can could will would shall should may might must".split())
ADVERBS = frozenset(
    "not very too also just here there now then always never often "
    "sometimes usually really quite so well".split()
)
WH_WORDS = {"which": "WDT", "what": "WDT", "who": "WP", "whom": "WP",
            "whose": "WP$", "where": "WRB", "when": "WRB", "why": "WRB",
            "how": "WRB"}
BE_FORMS = {"is": "VBZ", "am": "VBP", "are": "VBP", "was": "VBD",
            "were": "VBD", "be": "VB", "been": "VBN", "being": "VBG"}
HAVE_FORMS = {"has": "VBZ", "have": "VBP", "had": "VBD", "having": "VBG"}
DO_FORMS = {"does": "VBZ", "do": "VBP", "did": "VBD", "doing": "VBG"}
COMMON_VERBS = frozenset(
    "run like stay reach contain go come make know think see want use "
    "live work get take give find tell say feel seem keep let begin help "
    "talk turn start show hear play move believe hold bring happen write "
    "sit stand lose pay meet learn speak read eat drink study visit enjoy "
    "heat cook travel teach watch listen walk buy try call need love".split()
)
ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "ical", "less", "ish")
NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ance", "ence",
                 "ship", "hood", "dom", "ism", "ure")

PUNCT_TAGS = {".": ".", "!": ".", "?": ".", ",": ",", ":": ":", ";": ":",
              "(": "-LRB-", "[": "-LRB-", "{": "-LRB-", ")": "-RRB-",
              "]": "-RRB-", "}": "-RRB-", '"': "''", "'": "''", "`": "``",
              "$": "$", "#": "#"}

GAZETTEER = {
    "france": "GPE", "germany": "GPE", "italy": "GPE", "spain": "GPE",
    "china": "GPE", "japan": "GPE", "england": "GPE", "america": "GPE",
    "russia": "GPE", "brazil": "GPE", "london": "GPE", "paris": "GPE",
    "berlin": "GPE", "rome": "GPE", "madrid": "GPE", "tokyo": "GPE",
    "europe": "GPE", "asia": "GPE",
    "john": "PERSON", "mary": "PERSON", "smith": "PERSON", "anna": "PERSON",
    "david": "PERSON", "sarah": "PERSON", "michael": "PERSON",
    "peter": "PERSON", "maria": "PERSON", "james": "PERSON",
}

IRREGULAR_PAST = {
    "made": "make", "went": "go", "took": "take", "got": "get",
    "said": "say", "came": "come", "saw": "see", "knew": "know",
    "thought": "think", "found": "find", "gave": "give", "told": "tell",
    "felt": "feel", "left": "leave", "kept": "keep", "began": "begin",
    "brought": "bring", "wrote": "write", "ran": "run", "ate": "eat",
    "met": "meet", "paid": "pay", "heard": "hear", "spoke": "speak",
    "sat": "sit", "stood": "stand", "lost": "lose", "bought": "buy",
    "taught": "teach",
}
PRONOUN_LEMMAS = {"me": "i", "us": "we", "him": "he", "them": "they",
                  "her": "she"}


class Backend(Protocol):
    name: str

    def annotate(
        self,
        text: str,
        doc_id: str,
        label: str,
        proficiency: int | None = None,
        source: str = "",
    ) -> AnnotatedDocument: ...


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text)


def split_sentences(tokens: list[str]) -> list[list[str]]:
    """New sentence after .!? when the next token looks sentence-initial."""
    sentences: list[list[str]] = []
    current: list[str] = []
    for i, token in enumerate(tokens):
        current.append(token)
        if token and all(c in SENTENCE_END for c in token):
            nxt = tokens[i + 1][:1] if i + 1 < len(tokens) else ""
            if nxt == "" or nxt.isupper() or nxt.isdigit() or nxt in "\"'(":
                sentences.append(current)
                current = []
    if current:
        sentences.append(current)
    return sentences


def _is_address(word: str) -> bool:
    return bool(EMAIL_RE.fullmatch(word) or URL_RE.fullmatch(word))


def tag_sentence(words: list[str]) -> list[str]:
    """Ordered-rule fine-grained tags, one per word."""
    tags: list[str] = []
    for position, word in enumerate(words):
        lower = word.lower()
        prev = tags[-1] if tags else ""
        tag = None
        if _is_address(word):
            tag = "ADD"
        elif len(word) == 1 and not word.isalnum():
            tag = PUNCT_TAGS.get(word, "SYM")
        elif word[0].isdigit():
            tag = "CD"
        elif lower == "i":
            tag = "PRP"
        elif lower in BE_FORMS:
            tag = BE_FORMS[lower]
        elif lower in HAVE_FORMS:
            tag = HAVE_FORMS[lower]
        elif lower in DO_FORMS:
            tag = DO_FORMS[lower]
        elif lower in DETERMINERS:
            tag = "DT"
        elif lower in PRONOUNS:
            tag = "PRP"
        elif lower in POSSESSIVES:
            tag = "PRP$"
        elif lower == "to":
            tag = "TO"
        elif lower in MODALS:
            tag = "MD"
        elif lower in PREPOSITIONS:
            tag = "IN"
        elif lower in CONJUNCTIONS:
            tag = "CC"
        elif lower in ADVERBS:
            tag = "RB"
        elif lower in WH_WORDS:
            tag = WH_WORDS[lower]
        elif word[0].isupper() and position > 0:
            tag = "NNPS" if lower.endswith("s") and len(word) > 4 else "NNP"
        elif lower in COMMON_VERBS:
            tag = "VB" if prev in ("TO", "MD") else "VBP"
        elif lower.endswith("s") and lower[:-1] in COMMON_VERBS:
            tag = "VBZ"
        elif lower in IRREGULAR_PAST:
            tag = "VBD"
        elif lower.endswith("ing") and len(lower) > 4:
            tag = "VBG"
        elif lower.endswith("ed") and len(lower) > 3:
            tag = "VBN" if prev in ("VBZ", "VBP", "VBD") else "VBD"
        elif lower.endswith("ly") and len(lower) > 3:
            tag = "RB"
        elif lower.endswith(ADJ_SUFFIXES):
            tag = "JJ"
        elif lower.endswith(NOUN_SUFFIXES):
            tag = "NN"
        elif word[0].isupper() and lower in GAZETTEER:
            tag = "NNP"
        elif lower.endswith("s") and not lower.endswith("ss") and len(lower) > 3:
            tag = "NNS"
        else:
            tag = "NN"
        tags.append(tag)
    return tags


def _strip_doubling(stem: str) -> str:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "lsez":
        return stem[:-1]
    return stem


def _verb_stem(bare: str) -> str:
    """Undo -ing/-ed spelling changes; prefer known verbs over heuristics."""
    if bare in COMMON_VERBS:
        return bare
    if bare + "e" in COMMON_VERBS:
        return bare + "e"
    stem = _strip_doubling(bare)
    if stem in COMMON_VERBS:
        return stem
    return stem + "e" if stem.endswith(("v", "u", "at")) else stem


def lemmatize(word: str, tag: str) -> str:
    lower = word.lower()
    if tag in ("ADD", "CD") or tag in PUNCT_TAGS.values() or tag == "SYM":
        return word
    if tag in ("NNP", "NNPS"):
        return word if tag == "NNP" else (word[:-1] if word.endswith("s") else word)
    if tag == "PRP":
        return PRONOUN_LEMMAS.get(lower, lower)
    if lower in BE_FORMS:
        return "be"
    if lower in HAVE_FORMS:
        return "have"
    if lower in DO_FORMS:
        return "do"
    if lower in IRREGULAR_PAST:
        return IRREGULAR_PAST[lower]
    if tag == "NNS":
        if lower.endswith("ies") and len(lower) > 4:
            return lower[:-3] + "y"
        if lower.endswith(("ses", "xes", "zes", "ches", "shes")):
            return lower[:-2]
        return lower[:-1] if lower.endswith("s") else lower
    if tag == "VBG" and lower.endswith("ing"):
        return _verb_stem(lower[:-3])
    if tag in ("VBD", "VBN") and lower.endswith("ed"):
        if lower.endswith("ied") and len(lower) > 4:
            return lower[:-3] + "y"
        return _verb_stem(lower[:-2])
    if tag == "VBZ":
        if lower.endswith("ies") and len(lower) > 4:
            return lower[:-3] + "y"
        if lower.endswith(("ses", "xes", "zes", "ches", "shes", "oes")):
            return lower[:-2]
        if lower.endswith("s") and not lower.endswith("ss"):
            return lower[:-1]
    return lower


def ner_sentence(words: list[str], tags: list[str]) -> list[str]:
    """BIO tags: gazetteer hits and capitalized proper nouns form spans."""
    qualifies = [
        lower in GAZETTEER or tag in ("NNP", "NNPS")
        for lower, tag in zip((w.lower() for w in words), tags)
    ]
    out = [""] * len(words)
    i = 0
    while i < len(words):
        if not qualifies[i]:
            i += 1
            continue
        j = i
        while j < len(words) and qualifies[j]:
            j += 1
        span_type = "MISC"
        for k in range(i, j):
            hit = GAZETTEER.get(words[k].lower())
            if hit:
                span_type = hit
                break
        out[i] = f"B-{span_type}"
        for k in range(i + 1, j):
            out[k] = f"I-{span_type}"
        i = j
    return out


DEP_BY_TAG = {"DT": "det", "PRP$": "det", "WDT": "det", "WP$": "det",
              "IN": "case", "TO": "case", "CC": "cc", "RB": "advmod",
              "WRB": "advmod", "JJ": "amod", "MD": "aux"}
NOMINAL_TAGS = ("PRP", "NN", "NNS", "NNP", "NNPS", "WP")


def attach_sentence(tags: list[str], punct: list[bool]) -> tuple[list[int], list[str]]:
    """Flat tree: one root, everything else a child of it."""
    root = next(
        (i for i, t in enumerate(tags) if t.startswith("VB") or t == "MD"),
        None,
    )
    if root is None:
        root = next((i for i, p in enumerate(punct) if not p), 0)
    heads: list[int] = []
    labels: list[str] = []
    for i, tag in enumerate(tags):
        if i == root:
            heads.append(ROOT)
            labels.append("root")
        elif punct[i]:
            heads.append(root)
            labels.append("punct")
        elif tag in NOMINAL_TAGS:
            heads.append(root)
            labels.append("nsubj" if i < root else "obj")
        elif tag.startswith("VB"):
            heads.append(root)
            labels.append("aux")
        else:
            heads.append(root)
            labels.append(DEP_BY_TAG.get(tag, "dep"))
    return heads, labels


class BuiltinPipeline:
    """Deterministic rule-based English pipeline."""

    name = "builtin"

    def annotate(
        self,
        text: str,
        doc_id: str,
        label: str,
        proficiency: int | None = None,
        source: str = "",
    ) -> AnnotatedDocument:
        sentences: list[tuple[TokenAnnotation, ...]] = []
        for words in split_sentences(tokenize(text)):
            tags = tag_sentence(words)
            punct = [len(w) == 1 and not w.isalnum() for w in words]
            ne_tags = ner_sentence(words, tags)
            heads, dep_labels = attach_sentence(tags, punct)
            sentences.append(
                tuple(
                    TokenAnnotation(
                        surface=word,
                        lemma=lemmatize(word, tag),
                        pos=tag,
                        ne_tag=ne,
                        head=head,
                        dep_label=dep,
                        is_punct=is_p,
                    )
                    for word, tag, ne, head, dep, is_p in zip(
                        words, tags, ne_tags, heads, dep_labels, punct
                    )
                )
            )
        if not sentences:
            raise PipelineError(f"document {doc_id!r} has no tokens")
        return AnnotatedDocument(
            doc_id=doc_id,
            label=label,
            sentences=tuple(sentences),
            proficiency=proficiency,
            source=source,
            char_length=len(text),
        )


class SpacyPipeline:
    """Adapter around an installed spaCy model."""

    def __init__(self, model: str) -> None:
        try:
            import spacy
        except ImportError:
            raise PipelineError(
                "spaCy is not installed; run 'pip install spacy' and "
                f"'python -m spacy download {model}', or use the "
                "'builtin' pipeline"
            ) from None
        try:
            self._nlp = spacy.load(model)
        except OSError:
            raise PipelineError(
                f"spaCy model {model!r} is not downloaded; run "
                f"'python -m spacy download {model}'"
            ) from None
        self.name = f"spacy:{model}"

    def annotate(
        self,
        text: str,
        doc_id: str,
        label: str,
        proficiency: int | None = None,
        source: str = "",
    ) -> AnnotatedDocument:
        parsed = self._nlp(text)
        sentences = []
        for sent in parsed.sents:
            offset = sent.start
            tokens = []
            for token in sent:
                if token.ent_iob_ in ("B", "I"):
                    ne = f"{token.ent_iob_}-{token.ent_type_}"
                else:
                    ne = ""
                head = ROOT if token.head is token else token.head.i - offset
                tokens.append(
                    TokenAnnotation(
                        surface=token.text,
                        lemma=token.lemma_,
                        pos=token.tag_,
                        ne_tag=ne,
                        head=head,
                        dep_label=token.dep_.lower() or "dep",
                        is_punct=token.is_punct,
                    )
                )
            if tokens:
                sentences.append(tuple(tokens))
        if not sentences:
            raise PipelineError(f"document {doc_id!r} has no tokens")
        return AnnotatedDocument(
            doc_id=doc_id,
            label=label,
            sentences=tuple(sentences),
            proficiency=proficiency,
            source=source,
            char_length=len(text),
        )


def load_backend(model_name: str) -> Backend:
    """'builtin', or 'spacy:<model>' when spaCy and the model are installed."""
    if model_name == "builtin":
        return BuiltinPipeline()
    if model_name.startswith("spacy:"):
        return SpacyPipeline(model_name.split(":", 1)[1])
    raise PipelineError(
        f"unknown pipeline {model_name!r}: use 'builtin' or 'spacy:<model>'"
    )
