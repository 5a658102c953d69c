"""Tokenizer, stop-list, stemmer and author-name normalization.

Every component that counts or compares words goes through :func:`tokenize`
so that ``cit_word``, sentiment features and relatedness agree on what a
token is.
"""
import re
import string
import unicodedata

_PUNCT_TABLE = str.maketrans("", "", string.punctuation + "–—‘’“”")
_WS = re.compile(r"\s+")

STOPWORDS = frozenset("""
a about after again all also although am among an and any are as at be because
been before being between both but by can cannot could did do does doing down
during each else etc even ever every few for from had has have having he her
here him his how however i if in into is it its just let like made many may me
might more most much must my no nor not now of off often on one only or other
others our out over own per same shall she should since so some such than that
the their them then there these they this those though through thus to too two
under up us use used using very via was we well were what when where which
while who why will with within without would yet you your al et fig eq ie eg
vs
""".split())


def normalize_whitespace(text):
    return _WS.sub(" ", text).strip()


def tokenize(text):
    """Lowercased whitespace tokens with punctuation stripped; empty tokens dropped."""
    out = []
    for raw in text.split():
        tok = raw.translate(_PUNCT_TABLE).lower()
        if tok:
            out.append(tok)
    return out


def count_words(text):
    return len(tokenize(text))


def stem(token):
    """Strip one of the suffixes ing/ed/es/s, keeping a stem of at least 3 chars."""
    for suffix in ("ing", "ed", "es", "s"):
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    return token


def content_stems(text):
    return {stem(t) for t in tokenize(text) if t not in STOPWORDS and not t.isdigit()}


def _ascii_fold(text):
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def normalize_author(name):
    """Collapse an author name to ``"<given initials> <surname>"``.

    Accepts "Given Middle Surname" and "Surname, Given Middle" forms.

    >>> normalize_author("Smith, John A.")
    'ja smith'
    >>> normalize_author("J. A. Smith")
    'ja smith'
    """
    name = _ascii_fold(name).strip()
    if not name:
        return ""
    if "," in name:
        surname, _, given = name.partition(",")
    else:
        parts = name.split()
        surname, given = parts[-1], " ".join(parts[:-1])
    surname = surname.translate(_PUNCT_TABLE).lower().replace(" ", "")
    initials = "".join(
        p[0] for p in re.split(r"[\s.\-]+", given.lower()) if p and p[0].isalpha()
    )
    return f"{initials} {surname}".strip()


def surname(name):
    """Surname of a normalized author name."""
    return name.rsplit(" ", 1)[-1] if name else ""
