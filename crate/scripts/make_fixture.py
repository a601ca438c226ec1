"""Writes the bundled 500-record wiki/reference fixture.

Output is fully determined by SEED, so rerunning reproduces the committed files.
"""
import json
import random
import sys
from pathlib import Path

SEED = 20240607
N_RECORDS = 500

CATEGORIES = ["river", "castle", "village", "festival", "railway",
              "monastery", "lighthouse", "glacier", "observatory", "bridge"]
HEADS = ["Alder", "Brack", "Corran", "Dun", "Elm", "Fen", "Gors", "Hollin", "Ivers",
         "Jarrow", "Kell", "Lamb", "Merrow", "Nant", "Orme", "Pell", "Quarr", "Rath",
         "Strath", "Tarn", "Ulver", "Vey", "Wyn", "Yarrow"]
TAILS = ["ton", "wick", "mere", "ford", "by", "stead", "holm", "ley", "worth", "garth",
         "dale", "field", "more", "haven", "brook", "crag"]
REGIONS = ["Northmoor", "Eastfell", "Saltmarsh", "Highcombe", "Greywater", "Lowland",
           "Redcliff", "Westmarch", "Coldharbour", "Ashvale", "Brightwater", "Stonebridge"]
FIRST = ["Agnes", "Bertram", "Cecily", "Dorian", "Edith", "Fergus", "Gwendolyn", "Hector",
         "Isolde", "Jasper", "Lavinia", "Mortimer", "Nerys", "Oswin", "Rowena", "Silas"]
LAST = ["Ashcombe", "Blackwood", "Carrow", "Dunmore", "Everleigh", "Fairbairn", "Greaves",
        "Hartley", "Ingram", "Kestrel", "Lockhart", "Marlow", "Penrose", "Quayle", "Thorne"]
FEATURES = ["granite arches", "painted ceilings", "timber galleries", "stone terraces",
            "copper domes", "iron railings", "chalk cliffs", "orchard gardens",
            "salt meadows", "brass instruments", "carved pillars", "walled courtyards"]
ADJS = ["remarkable", "weathered", "elegant", "austere", "picturesque", "sturdy",
        "ornate", "ancient", "celebrated", "secluded"]
EVENTS = ["severe flood", "long drought", "great storm", "fire", "landslide", "harsh winter"]

FILLER = [
    "Many {cat} sites across the country share a similar history of slow growth.",
    "Visitors often combine a trip to the {cat} with walks through the surrounding countryside.",
    "Regional guidebooks list the {cat} among the notable places worth a detour.",
    "Records kept by the county archive mention the {cat} in several parish documents.",
    "The local council publishes seasonal notices about access to the {cat}.",
    "Photographers favour the early morning light that falls across the {cat}.",
    "Scholars have compared the {cat} with similar examples in neighbouring counties.",
    "A small museum nearby holds maps and letters describing the {cat} in detail.",
    "Volunteers help maintain the paths and signs that lead towards the {cat}.",
    "Older residents still tell stories about life around the {cat} before the war.",
]

UNRELATED = [
    "The committee approved a new budget for road maintenance and public lighting.",
    "Quarterly figures show that retail sales rose slightly during the summer months.",
    "Several schools introduced longer lunch breaks after consulting with parents.",
    "The football club signed two young players from the regional academy this season.",
    "Weather forecasters expect mild temperatures and occasional showers next week.",
    "A new bus timetable will come into effect at the start of the next month.",
]

NON_ENGLISH = ["город", "история", "река", "замок", "деревня", "праздник", "мост",
               "ηλιος", "θάλασσα", "βουνό", "日本", "歴史", "山"]


def facts(rng, name, cat, cap):
    region = rng.choice(REGIONS)
    person = f"{rng.choice(FIRST)} {rng.choice(LAST)}"
    year = rng.randint(1100, 1950)
    f1, f2 = rng.sample(FEATURES, 2)
    a1, a2, a3 = rng.sample(ADJS, 3)
    visitors = rng.randint(2, 90) * 1000
    event = rng.choice(EVENTS)
    return [
        f"{name} {cap} is a {cat} in the {region} region.",
        f"The {cat} was established in {year} by {person}.",
        f"It is known for its {a1} {f1} and {a2} {f2}.",
        f"{name} {cap} attracts {visitors} visitors every year.",
        f"In {year + rng.randint(20, 70)} the {cat} was restored after a {event}.",
        f"Local historians describe the {f1} as {a3}.",
    ]


def good_ref(rng, cat, supported):
    body = list(supported)
    body += rng.sample(FILLER, rng.randint(3, 6))
    rng.shuffle(body)
    return " ".join(s.format(cat=cat) for s in body)


def noisy_ref(rng, cat, supported):
    """Readable text wrapped in markup, tables and links that cleaning removes."""
    lines = ["<div class=\"nav\">", "<ul>"]
    lines.append("| Year | Visitors | Notes |")
    lines.append("| 1990 | 1200 | reopened |")
    lines.append(" ".join(supported) + " See https://example.org/archive/" + str(rng.randint(1, 999)) + " for scans.")
    lines.append(" ".join(s.format(cat=cat) for s in rng.sample(FILLER, 3)))
    lines.append("</ul>")
    return "\n".join(lines)


def markup_ref(rng):
    """Only tables, tags and links: long enough raw, empty once cleaned."""
    rows = [f"| row {k} | {rng.randint(1900, 2000)} | {rng.randint(1, 99)} | n/a |" for k in range(4)]
    return "\n".join(["<table>", "| Name | Year | Count | Notes |"] + rows
                     + ["https://example.org/a https://example.org/b", "</table>"])


def short_ref(rng):
    return rng.choice(["See page four.", "Retrieved 12 March.", "Archived copy.", "Photo gallery only."])


def foreign_ref(rng):
    words = [rng.choice(NON_ENGLISH) for _ in range(18)] + ["the", "castle", "river", "old"]
    rng.shuffle(words)
    return " ".join(words) + "."


def unrelated_ref(rng):
    return " ".join(rng.sample(UNRELATED, 4))


def decorate(rng, sentences):
    """Adds the wiki markup that cleaning is expected to strip."""
    out = []
    if rng.random() < 0.5:
        out.append("{{Infobox place|name={{lang|en|x}}|map=yes}}")
    if rng.random() < 0.2:
        out.append("[[File:View.jpg|thumb|A view]]")
    for s in sentences:
        if rng.random() < 0.15:
            s = s.replace(" region", " [[Region|region]]", 1)
        if rng.random() < 0.1:
            s += "{{citation needed}}"
        out.append(s)
    if rng.random() < 0.1:
        out.append("=====")
    if rng.random() < 0.15:
        out.append("You can help Wikipedia by expanding it.")
    return " ".join(out)


def main(out_dir):
    rng = random.Random(SEED)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = set()
    wiki, refs = [], []
    for i in range(N_RECORDS):
        while True:
            name = rng.choice(HEADS) + rng.choice(TAILS)
            cat = CATEGORIES[i % len(CATEGORIES)]
            if (name, cat) not in names:
                names.add((name, cat))
                break
        cap = cat.capitalize()
        title = f"{name} {cap}"
        fs = facts(rng, name, cat, cap)
        chosen = sorted(rng.sample(range(len(fs)), rng.randint(3, 6)))
        sentences = [fs[k] for k in chosen]

        n_cit = rng.choices([0, 1, 2, 3, 4, 5, 6, 7], weights=[2, 6, 10, 14, 14, 10, 5, 4])[0]
        citations, marks = [], [0] * len(sentences)
        for c in range(n_cit):
            rid = f"r{i:03d}_{c}"
            kind = rng.choices(["good", "noisy", "short", "foreign", "unrelated", "markup", "missing"],
                               weights=[60, 10, 8, 6, 8, 4, 8])[0]
            citations.append(rid)
            supported = rng.sample(sentences, min(len(sentences), rng.randint(1, 3)))
            if kind in ("good", "noisy"):
                for s in supported:
                    k = sentences.index(s)
                    if marks[k] == 0 and rng.random() < 0.7:
                        marks[k] = c + 1
            elif rng.random() < 0.3:
                # Cited even though the source is unusable.
                k = rng.randrange(len(sentences))
                if marks[k] == 0:
                    marks[k] = c + 1
            text = {
                "good": lambda: good_ref(rng, cat, supported),
                "noisy": lambda: noisy_ref(rng, cat, supported),
                "short": lambda: short_ref(rng),
                "foreign": lambda: foreign_ref(rng),
                "unrelated": lambda: unrelated_ref(rng),
                "markup": lambda: markup_ref(rng),
                "missing": lambda: None,
            }[kind]()
            if text is not None:
                refs.append({"id": rid, "url": f"https://example.org/{rid}", "raw_text": text})

        marked = [s + (f"[{m}]" if m else "") for s, m in zip(sentences, marks)]
        record = {"id": f"w{i:03d}", "title": title,
                  "first_section": decorate(rng, marked), "citations": citations}
        wiki.append(record)

    # A few malformed records the report must account for.
    wiki[17]["title"] = " "
    wiki[233]["first_section"] += " A dangling claim.[9]"
    refs.append(dict(refs[5]))

    for name, rows in (("wiki.jsonl", wiki), ("refs.jsonl", refs)):
        with open(out_dir / name, "w", encoding="utf-8") as f:
            for r in rows:
                f.write(json.dumps(r, ensure_ascii=False) + "\n")
    print(f"{len(wiki)} wiki records, {len(refs)} reference documents -> {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/cli/tests/fixtures")
