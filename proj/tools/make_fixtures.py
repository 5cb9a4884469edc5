# Regenerates fixtures/*.json. Probabilities quoted from the figures; the rest is scaffolding.
import json
import os

FIX = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")

def dist(d, rest="other"):
    s = sum(d.values())
    assert s <= 1 + 1e-12, d
    out = dict(d)
    r = round(1 - s, 12)
    if r > 0:
        out[rest] = out.get(rest, 0) + r
    assert abs(sum(out.values()) - 1) < 1e-10
    return out
def dump(path, doc):
    with open(path, "w") as f:
        f.write(json.dumps(doc, indent=1) + "\n")

# DROP 160: block [Q ? The answer is d1 d2 d3]
labels = [str(i) for i in range(10)] + ["The", "answer", "is", "Q", "?", "other"]
ctx = {"2": dist({"The": .97}), "3": dist({"answer": .96}), "4": dist({"is": .95})}
def rule(pattern, outs):
    return {"pattern": pattern, "outputs": outs}
P = ["*", "*"]
C = ["The", "answer", "is"]
drop = {
 "vocab_size": len(labels), "k": 8, "labels": labels,
 "default_dist": {"other": 1.0},
 "rules": [
  rule(P + ["M"] * 6, {"2": dist({"The": .95}), "3": dist({"answer": .93}), "4": dist({"is": .92}),
                       "5": dist({"8": .72, "6": .1, "5": .05}), "6": dist({"5": .4, "7": .2, "3": .1}),
                       "7": dist({"7": .35, "5": .2, "1": .1})}),
  rule(P + C + ["8", "M", "M"], {**ctx, "5": dist({"6": .64, "8": .11, "5": .10, "0": .05, "9": .05, "3": .05}),
                                 "6": dist({"5": .86}), "7": dist({"7": .81})}),
  rule(P + C + ["M", "5", "7"], {**ctx, "5": dist({"8": .94, "6": .03}), "6": dist({"5": .93}), "7": dist({"7": .92})}),
  rule(P + C + ["8", "5", "7"], {**ctx, "5": dist({"8": .94, "6": .03}), "6": dist({"5": .93}), "7": dist({"7": .92})}),
  rule(P + C + ["6", "5", "7"], {**ctx, "5": dist({"6": .58, "8": .30}), "6": dist({"5": .9}), "7": dist({"7": .9})}),
 ],
 "run": {"prompt": ["Q", "?"], "config": {"block_len": 8, "max_new_tokens": 6},
         "expect": {"span": [3, 6], "answers": {"t2t_replace": ["6", "5", "7"], "t2m_lowprob": ["8", "5", "7"]}}},
}
dump(FIX + "/drop160.json", drop)

# Fig 1a: block [<s> Write I feel so X today .]
labels = ["<s>", "Write", "I", "feel", "so", "today", ".", "purple", "sad", "happy", "tired", "angry", "calm",
          "bored", "glad", "lonely", "scared", "worried", "other"]
ctx = {"2": dist({"I": .97}), "3": dist({"feel": .96}), "4": dist({"so": .95}), "6": dist({"today": .95}), "7": dist({".": .98})}
C1, C2 = ["I", "feel", "so"], ["today", "."]
inertia = {"purple": 2e-5, "sad": .12, "happy": .11, "tired": .10, "angry": .10, "calm": .10, "bored": .10,
           "glad": .10, "lonely": .09, "scared": .09, "worried": .08998}
assert abs(sum(inertia.values()) - 1) < 1e-12
fig1a = {
 "vocab_size": len(labels), "k": 8, "labels": labels,
 "default_dist": {"other": 1.0},
 "rules": [
  rule(P + ["M"] * 6, {"2": dist({"I": .95}), "3": dist({"feel": .93}), "4": dist({"so": .9}),
                       "5": dist({"purple": .72, "sad": .1, "happy": .08}), "6": dist({"today": .9}), "7": dist({".": .9})}),
  rule(P + C1 + ["purple"] + C2, {**ctx, "5": inertia}),
  rule(P + C1 + ["M"] + C2, {**ctx, "5": dist({"sad": .8, "happy": .1})}),
  rule(P + C1 + ["sad"] + C2, {**ctx, "5": dist({"sad": .85, "happy": .08})}),
 ],
 "run": {"prompt": ["<s>", "Write"], "config": {"block_len": 8, "max_new_tokens": 6},
         "expect": {"span": [3, 4], "answers": {"t2t_replace": ["purple"], "t2m_lowprob": ["sad"]}}},
}
dump(FIX + "/fig1a.json", fig1a)

# Fig 1c: block [Q who The quarterback was Jon Kit na . <eos>]
labels = ["Q", "who", "The", "quarterback", "was", "Jon", "Kit", "na", ".", "<eos>", "other"]
ctx = {"2": dist({"The": .97}), "4": dist({"was": .96}), "8": dist({".": .97}), "9": dist({"<eos>": .98})}
qb = {"3": dist({"quarterback": .95})}
C2 = [".", "<eos>"]
fig1c = {
 "vocab_size": len(labels), "k": 8, "labels": labels, "eos_id": "<eos>",
 "default_dist": {"other": 1.0},
 "rules": [
  rule(P + ["M"] * 8, {"2": dist({"The": .95}), "3": dist({"quarterback": .6}), "4": dist({"was": .93}),
                       "5": dist({"Jon": .55, "Kit": .2}), "6": dist({"Kit": .5, "Jon": .2}), "7": dist({"na": .45}),
                       "8": dist({".": .9}), "9": dist({"<eos>": .9})}),
  rule(P + ["The", "M", "was", "M", "M", "M"] + C2,
       {**ctx, "3": dist({"quarterback": .6}), "5": dist({"Jon": .74, "Kit": .1}), "6": dist({"Kit": .72, "Jon": .1}),
        "7": dist({"na": .71})}),
  # incomplete context: the subject is still masked
  rule(P + ["The", "M", "was", "Jon", "Kit", "na"] + C2,
       {**ctx, "3": dist({"quarterback": .65}), "5": dist({"Kit": .55, "Jon": .32}), "6": dist({"Kit": .57, "Jon": .2}),
        "7": dist({"na": .45, "Kit": .2})}),
  rule(P + ["The", "quarterback", "was", "Kit", "Kit", "na"] + C2,
       {**ctx, **qb, "5": dist({"Kit": .6, "Jon": .3}), "6": dist({"Kit": .6, "Jon": .2}), "7": dist({"na": .5, "Kit": .2})}),
  rule(P + ["The", "quarterback", "was", "M", "Kit", "na"] + C2,
       {**ctx, **qb, "5": dist({"Jon": .96}), "6": dist({"Kit": .9}), "7": dist({"na": .5, "Kit": .2})}),
  rule(P + ["The", "quarterback", "was", "Jon", "Kit", "M"] + C2,
       {**ctx, **qb, "5": dist({"Jon": .96}), "6": dist({"Kit": .97}), "7": dist({"na": .98})}),
  rule(P + ["The", "quarterback", "was", "Jon", "Kit", "na"] + C2,
       {**ctx, **qb, "5": dist({"Jon": .96}), "6": dist({"Kit": .99}), "7": dist({"na": .98})}),
 ],
 "run": {"prompt": ["Q", "who"], "config": {"block_len": 10, "max_new_tokens": 8, "tau_lp": 0.6},
         "expect": {"span": [3, 6], "answers": {"t2t_replace": ["Kit", "Kit", "na"], "t2m_lowprob": ["Jon", "Kit", "na"]}}},
}
dump(FIX + "/fig1c.json", fig1c)

# Fig 2: [I went to X and visited the Y Tower]
labels = ["I", "went", "to", "France", "Japan", "banana", "and", "visited", "the", "Eiffel", "Tokyo", "Leaning", "Tower", "other"]
head, tail = ["I", "went", "to"], ["and", "visited", "the"]
tower = {"8": dist({"Tower": .99})}
fig2 = {
 "vocab_size": len(labels), "k": 8, "labels": labels,
 "default_dist": {"other": 1.0},
 "rules": [
  rule(head + ["France"] + tail + ["M", "*"], {"7": dist({"Eiffel": .97, "Tokyo": .01}), **tower}),
  rule(head + ["M"] + tail + ["M", "*"], {"7": dist({"Eiffel": .82, "Tokyo": .05, "Leaning": .03}), **tower}),
  rule(head + ["Japan"] + tail + ["M", "*"], {"7": dist({"Tokyo": .91, "Eiffel": .05}), **tower}),
  rule(head + ["banana"] + tail + ["M", "*"], {"7": dist({"Eiffel": .33, "Tokyo": .2, "Leaning": .15}, ), **tower}),
  rule(head + ["France"] + tail + ["Eiffel", "*"], {"7": dist({"Eiffel": .98}), **tower}),
 ],
 "run": {"prompt": head + ["France"] + tail, "config": {"block_len": 9, "max_new_tokens": 2},
         "expect": {"span": [0, 2], "answers": {"t2t_replace": ["Eiffel", "Tower"], "t2m_lowprob": ["Eiffel", "Tower"]}}},
}
dump(FIX + "/fig2.json", fig2)
