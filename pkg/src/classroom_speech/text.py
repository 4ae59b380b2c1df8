"""Word tokenization and question detection.

Every metric that compares words (WER, lexical overlap, MLU, words per
minute) goes through :func:`normalize_tokens`, so casing and punctuation
differences between transcribers never count as word errors.
"""

from __future__ import annotations

# Characters removed before splitting. They are replaced by a space so that
# "yes,no" still yields two words.
PUNCTUATION = '.,!?;:"()'
_PUNCT_TABLE = str.maketrans({c: " " for c in PUNCTUATION})
# Typographic apostrophes are folded onto the ASCII one.
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


def normalize_tokens(raw_text: str) -> list[str]:
    """Split ``raw_text`` into lowercase word tokens.

    Rules: lowercase; ``. , ! ? ; : " ( )`` removed; apostrophes kept inside
    words (``it's``) but trimmed from word edges; whitespace runs collapse;
    tokens without any letter or digit (a lone ``-``) are dropped.

    >>> normalize_tokens("Where is it?")
    ['where', 'is', 'it']
    >>> normalize_tokens("it's going to explode")
    ["it's", 'going', 'to', 'explode']
    """
    text = raw_text.translate(_APOSTROPHES).lower().translate(_PUNCT_TABLE)
    tokens = []
    for tok in text.split():
        tok = tok.strip("'")
        if tok and any(ch.isalnum() for ch in tok):
            tokens.append(tok)
    return tokens


def classify_question(raw_text: str) -> bool:
    """True iff the unnormalized text contains a question mark."""
    return "?" in raw_text


# Function words ignored by the "content" lexical-overlap mode.
STOPWORDS = frozenset(
    """
    a an the and or but if so then than as of at by for from in into on onto
    to up down out off over under with without about
    i me my mine myself you your yours yourself he him his himself she her
    hers herself it its itself we us our ours ourselves they them their
    theirs themselves this that these those
    am is are was were be been being do does did doing done have has had
    having will would shall should can could may might must
    what which who whom whose when where why how
    not no nor all any both each few more most other some such only own
    same too very just there here
    i'm you're he's she's it's we're they're i've you've we've they've
    i'll you'll he'll she'll it'll we'll they'll i'd you'd he'd she'd we'd
    they'd isn't aren't wasn't weren't don't doesn't didn't haven't hasn't
    hadn't won't wouldn't can't couldn't shouldn't that's what's there's
    let's
    """.split()
)
