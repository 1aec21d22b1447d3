"""Writes the CoNLL04-style replay fixture: test.json (SpERT format) and
responses.json (raw model replies per run). Run build_replay_cache afterwards
to turn the replies into request-keyed caches."""

import json
import re
from pathlib import Path

HERE = Path(__file__).parent

# [surface|Type] marks an entity; relations are (type, head index, tail index).
SENTENCES = [
    ("[John Smith|Peop] , a spokesman for [Acme Corp.|Org] , said the plant in [Ohio|Loc] will close .",
     [("Work_For", 0, 1), ("OrgBased_In", 1, 2)]),
    ("[Maria Lopez|Peop] was born in [Madrid|Loc] , [Spain|Loc] , in 1950 .",
     [("Live_In", 0, 1), ("Live_In", 0, 2), ("Located_In", 1, 2)]),
    ("[Lee Harvey Oswald|Peop] shot [President Kennedy|Peop] in [Dallas|Loc] .",
     [("Kill", 0, 1)]),
    ("The [United Nations|Org] headquarters in [New York|Loc] hosted the meeting .",
     [("OrgBased_In", 0, 1)]),
    ("[Peter Brandt|Peop] , chairman of [Norsk Data|Org] , lives in [Oslo|Loc] .",
     [("Work_For", 0, 1), ("Live_In", 0, 2)]),
    ("[Boston|Loc] is the largest city in [Massachusetts|Loc] .",
     [("Located_In", 0, 1)]),
    ("The [Red Cross|Org] sent aid to [Haiti|Loc] after the [hurricane|Other] .",
     []),
    ("[Anna Berg|Peop] works as an editor at [The Daily Post|Org] in [Chicago|Loc] .",
     [("Work_For", 0, 1), ("OrgBased_In", 1, 2), ("Live_In", 0, 2)]),
    ("Police said [Tom Reed|Peop] killed [Sam Ortiz|Peop] near [Fresno|Loc] on [Tuesday|Other] .",
     [("Kill", 0, 1)]),
    ("[Lisbon|Loc] , the capital of [Portugal|Loc] , welcomed [Pope John Paul II|Peop] .",
     [("Located_In", 0, 1)]),
    ("[General Motors|Org] , based in [Detroit|Loc] , cut 5,000 jobs .",
     [("OrgBased_In", 0, 1)]),
    ("[Karen Wu|Peop] , a professor at [Stanford University|Org] , grew up in [Taipei|Loc] .",
     [("Work_For", 0, 1), ("Live_In", 0, 2)]),
    ("The [Nobel Prize|Other] was awarded to [Ruth Adler|Peop] of [Vienna|Loc] .",
     [("Live_In", 1, 2)]),
    ("[Fidel Castro|Peop] addressed the crowd in [Havana|Loc] .",
     [("Live_In", 0, 1)]),
    ("[Mark Davis|Peop] 's lawyer , [Ellen Ross|Peop] , works for [Ross & Hart|Org] .",
     [("Work_For", 1, 2)]),
    ("Residents of [Lyon|Loc] in [France|Loc] protested the new tax .",
     [("Located_In", 0, 1)]),
    ("[Greenpeace|Org] activists from [Amsterdam|Loc] boarded the ship .",
     [("OrgBased_In", 0, 1)]),
    ("[David Kim|Peop] , the mayor of [Seoul|Loc] , met officials from [Samsung|Org] .",
     [("Live_In", 0, 1)]),
    ("An explosion in [Beirut|Loc] killed [Ahmed Nasser|Peop] .",
     []),
    ("[Julia Stone|Peop] joined [NASA|Org] in [1992|Other] after moving to [Houston|Loc] .",
     [("Work_For", 0, 1), ("Live_In", 0, 3)]),
]

MARK = re.compile(r"\[([^|\]]+)\|(\w+)\]")


def to_record(index, markup, relations):
    tokens, entities, pos = [], [], 0
    for m in MARK.finditer(markup):
        tokens += markup[pos:m.start()].split()
        words = m.group(1).split()
        entities.append({"type": m.group(2), "start": len(tokens), "end": len(tokens) + len(words)})
        tokens += words
        pos = m.end()
    tokens += markup[pos:].split()
    rels = [{"type": t, "head": h, "tail": d} for t, h, d in relations]
    return {"tokens": tokens, "entities": entities, "relations": rels, "orig_id": index}


def gold_view(markup, relations):
    ents = [(m.group(1), m.group(2)) for m in MARK.finditer(markup)]
    rels = [(ents[h][0], ents[d][0], t) for t, h, d in relations]
    return ents, rels


def reply(ents, rels):
    return json.dumps({
        "Entities": [{"Entity": e, "Type": t} for e, t in ents],
        "Relationships": [{"Subject": s, "Object": o, "Type": t} for s, o, t in rels],
    })


def primary_run(run):
    out = []
    for i, (markup, relations) in enumerate(SENTENCES):
        ents, rels = gold_view(markup, relations)
        text = None
        if i == 0:
            text = "```json\n" + reply(ents, rels) + "\n```"
        elif i == 1:
            text = "Here is the JSON: " + reply(ents, rels[:2] if run != 3 else rels)
        elif i == 2:
            # Type mismatch: a location cannot kill.
            text = reply(ents, rels + [("Dallas", "President Kennedy", "Kill")])
        elif i == 3:
            # False declaration: the subject is not in the entity list.
            text = reply(ents, [("United Nations headquarters", "New York", "OrgBased_In")])
        elif i == 4 and run != 3:
            # Reversed direction: org -> peop is not a licensed Work_For.
            text = reply(ents, [("Norsk Data", "Peter Brandt", "Work_For"), rels[1]])
        elif i == 6 and run == 1:
            text = reply(ents[:2] + [("aid", "Other")], rels)
        elif i == 7:
            text = reply(ents, rels)[:-2] + ",]}"
        elif i == 8:
            text = reply(ents, rels + [("Tom Reed", "Fresno", "Live_In")])
        elif i == 9:
            text = reply(ents[:2] + [("Pope John Paul II", "Other")], rels)
        elif i == 10:
            text = reply(ents, rels).replace('"', "'")
        elif i == 11 and run != 2:
            text = "I'm sorry, but I can't determine the entities in that text."
        elif i == 13:
            text = json.dumps({
                "entities": [{"entity": e, "type": t} for e, t in ents],
                "relationships": [{"subject": s, "object": o, "type": t} for s, o, t in rels],
            })
        elif i == 14:
            # False declaration through a surface mismatch.
            text = reply(ents, [("Ellen Ross", "Ross and Hart", "Work_For")])
        elif i == 15:
            text = reply(ents, rels + [("France", "Lyon", "Located_In")])
        elif i == 17:
            text = reply(ents, rels + [("David Kim", "Samsung", "Work_For")])
        elif i == 18:
            text = reply(ents, [("Beirut", "Ahmed Nasser", "Kill")])
        elif i == 19:
            text = reply(ents, rels).replace("], ", "],\n")
        out.append(text if text is not None else reply(ents, rels))
    return out


def auditor_run(run):
    out = []
    for i, (markup, relations) in enumerate(SENTENCES):
        ents, rels = gold_view(markup, relations)
        if i == 0:
            ents = ents[:2]
        elif i == 9:
            ents = [(e, "Org" if t == "Loc" and run == 2 else t) for e, t in ents]
        elif i == 12:
            ents = ents[1:]
        out.append(reply(ents, []))
    return out


def main():
    records = [to_record(i, m, r) for i, (m, r) in enumerate(SENTENCES)]
    (HERE / "test.json").write_text(json.dumps(records, indent=1) + "\n")
    responses = {
        "primary": [primary_run(r) for r in (1, 2, 3)],
        "auditor": [auditor_run(r) for r in (1, 2, 3)],
    }
    (HERE / "responses.json").write_text(json.dumps(responses, indent=1, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
