#!/usr/bin/env python3
"""Writes the synthetic mini-corpus under data/mini and the kappa fixture.

Output is a pure function of SEED; rerunning reproduces the committed bytes.
"""
import json
import random
from pathlib import Path

SEED = 20240611
ROOT = Path(__file__).resolve().parent.parent
MINI = ROOT / "data" / "mini"
FIXTURES = ROOT / "tests" / "fixtures"

GROUPS = ["DISABLED", "WOMEN", "ELDERLY", "CHILDREN", "SINGLE_PARENT", "ORDINARY",
          "DISADVANTAGED", "OTHER"]
SUBCATS = ["UNBALANCED_POWER", "SPECTATOR", "PREJUDICE", "APPEAL", "COMPASSION"]
LEVELS = ["MILD", "MODERATE", "SEVERE"]

EN_TERMS = [  # term, confidence, relevant
    ("poor things", 0.92, 1), ("bless their hearts", 0.88, 1), ("those people", 0.81, 1),
    ("less fortunate", 0.90, 1), ("so brave", 0.77, 1), ("such an inspiration", 0.85, 1),
    ("unfortunate souls", 0.83, 1), ("we must help them", 0.79, 1), ("they deserve pity", 0.86, 1),
    ("in spite of their", 0.74, 1), ("heartbreaking", 0.70, 1), ("helpless", 0.80, 1),
    ("can't help themselves", 0.84, 1), ("should be grateful", 0.87, 1), ("for their own good", 0.82, 1),
    ("sad", 0.35, 0), ("help", 0.30, 0), ("people", 0.20, 0), ("brave", 0.40, 0), ("need", 0.25, 0),
]
ZH_TERMS = [
    ("真可怜", 0.93, 1), ("弱势群体", 0.71, 1), ("他们应该感恩", 0.89, 1), ("太不容易了", 0.78, 1),
    ("值得同情", 0.86, 1), ("帮帮这些可怜人", 0.91, 1), ("身残志坚", 0.84, 1), ("可怜的孩子", 0.88, 1),
    ("老人家不懂", 0.80, 1), ("单亲家庭的孩子", 0.76, 1), ("女人就该", 0.83, 1), ("底层人", 0.79, 1),
    ("给他们一点关爱", 0.81, 1), ("不知好歹", 0.77, 1), ("心疼", 0.72, 1),
    ("孩子", 0.20, 0), ("老人", 0.22, 0), ("帮助", 0.30, 0), ("社会", 0.15, 0), ("生活", 0.10, 0),
]

EN_PCL = [
    "Honestly the {t} in this neighborhood just need someone to show them the way.",
    "It is {t}, watching them try so hard at something so simple.",
    "We should all remember the {t} and donate a little this season.",
    "Look at them trying, {t}. Someone really should step in for them.",
    "I always tell my kids to be kind to the {t}, they do not know any better.",
    "These folks are {t}, I wish they understood what is good for them.",
]
EN_PCL_NO_TERM = [
    "Good for them for even getting out of bed in the morning, honestly.",
    "Cute that they think they can run the committee on their own.",
    "Someone should explain budgeting to them slowly, with pictures.",
]
EN_NEUTRAL = [
    "The city council approved the new budget for public transit on Tuesday.",
    "Our team shipped the release after fixing two regressions in the parser.",
    "The recipe needs more garlic and a longer simmer than written.",
    "Volunteers repaired the community garden fence over the weekend.",
    "The library extended its opening hours during exam season.",
    "Local schools will add an extra bus route starting next month.",
    "My grandmother taught me chess and still beats me most evenings.",
    "The marathon route closes three downtown streets on Sunday.",
    "A new accessible entrance opened at the train station today.",
    "The clinic hired two more nurses to shorten waiting times.",
    "It is sad that the bakery closed, the bread was great.",
    "People lined up early for the concert tickets.",
]
ZH_PCL = [
    "看到这些{t}，我们这些正常人真的要多包容一点。",
    "{t}，他们能活成这样已经很好了，还要求什么呢。",
    "这种事情发生在他们身上也不奇怪，{t}。",
    "每次看到这种新闻都觉得{t}，我们应该施舍一点。",
    "{t}，毕竟他们什么都不懂，只能靠别人。",
    "说到底还是{t}，我们有能力的人要拉一把。",
]
ZH_PCL_NO_TERM = [
    "他们能做到这样已经算不错了，别要求太高。",
    "这些人能有份工作就该知足了吧。",
    "让他们自己决定？还是算了，我们替他们安排好。",
]
ZH_NEUTRAL = [
    "今天地铁二号线延长了运营时间，方便晚归的乘客。",
    "社区图书馆新增了无障碍通道和阅读区。",
    "这家面馆的牛肉面味道很正宗，推荐大家去尝尝。",
    "周末带父母去公园散步，天气很好。",
    "学校下个月开始增加一条校车线路。",
    "医院新开了夜间门诊，缓解了看病难的问题。",
    "公司年会定在下周五，大家准备节目吧。",
    "今年的马拉松比赛报名人数创了新高。",
    "小区里的老人家在组织太极拳活动。",
    "社会各界都在关注新的养老政策。",
    "孩子们在科技馆玩得很开心。",
    "生活中的小事也值得记录。",
]


def pick_term(rng, terms):
    relevant = [t for t, _, r in terms if r]
    return rng.choice(relevant)


def pcl_text(rng, lang):
    if lang == "EN":
        if rng.random() < 0.8:
            return rng.choice(EN_PCL).format(t=pick_term(rng, EN_TERMS))
        return rng.choice(EN_PCL_NO_TERM)
    if rng.random() < 0.8:
        return rng.choice(ZH_PCL).format(t=pick_term(rng, ZH_TERMS))
    return rng.choice(ZH_PCL_NO_TERM)


def neutral_text(rng, lang):
    base = rng.choice(EN_NEUTRAL if lang == "EN" else ZH_NEUTRAL)
    # a sprinkle of accidental hits keeps the baseline imperfect
    if rng.random() < 0.08:
        term = pick_term(rng, EN_TERMS if lang == "EN" else ZH_TERMS)
        base += (" Not {} at all though.".format(term) if lang == "EN" else "并不是{}。".format(term))
    return base


def jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")


def tsv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write("\t".join(str(c) for c in row) + "\n")


def label_for(rng, doc_id, annotator, pcl, intensity, subcats, group):
    rec = {"doc_id": doc_id, "annotator_id": annotator, "round": "PRIMARY", "pcl": pcl}
    if pcl:
        rec["subcategories"] = subcats
        rec["intensity"] = intensity
        if group:
            rec["group"] = group
    return rec


def labeled_corpus(rng):
    docs, labels = [], []
    counter = 0
    for lang, sources in (("EN", ["REDDIT", "NEWS"]), ("ZH", ["WEIBO", "ZHIHU"])):
        for _ in range(250):
            counter += 1
            doc_id = "{}-{:04d}".format(lang.lower(), counter)
            pcl = rng.random() < 0.3
            text = pcl_text(rng, lang) if pcl else neutral_text(rng, lang)
            text = "{} #{}".format(text, counter) if lang == "EN" else "{}（{}）".format(text, counter)
            split = "TEST" if rng.random() < 0.25 else "TRAIN"
            group = rng.choice(GROUPS)
            doc = {"id": doc_id, "text": text, "language": lang, "source": rng.choice(sources),
                   "group_tag": group, "split": split,
                   "collected_at": "2023-{:02d}-{:02d}".format(rng.randint(1, 12), rng.randint(1, 28))}
            if split == "TEST" and rng.random() < 0.3:
                doc["interference"] = True
            docs.append(doc)

            subcats = sorted(rng.sample(SUBCATS, rng.choice([1, 1, 2])))
            intensity = rng.choice(LEVELS)
            first = label_for(rng, doc_id, "ann-a", pcl, intensity, subcats, group)
            second = dict(first, annotator_id="ann-b")
            if rng.random() < 0.15:  # a disagreement, settled by proofreading
                if pcl and intensity == "MILD":
                    second = label_for(rng, doc_id, "ann-b", False, None, None, None)
                elif pcl:
                    second["intensity"] = rng.choice([l for l in LEVELS if l != intensity])
                else:
                    second = label_for(rng, doc_id, "ann-b", True, "MILD", ["SPECTATOR"], group)
                labels += [first, second, dict(first, annotator_id="proof-1", round="PROOFREAD")]
            else:
                labels += [first, second]
    return docs, labels


def raw_posts(rng):
    tags = ["[转发]", "#分享#", "(repost)", "[removed]"]
    emojis = ["😢", "🙏", "❤️", "😂"]
    posts, counter = [], 0
    for _ in range(400):
        counter += 1
        lang = "EN" if counter % 2 else "ZH"
        r = rng.random()
        text = pcl_text(rng, lang) if r < 0.35 else neutral_text(rng, lang)
        if rng.random() < 0.3:
            text = "{} {}".format(rng.choice(tags), text)
        if rng.random() < 0.3:
            text = "@user_{} {}".format(rng.randint(1, 99), text)
        if rng.random() < 0.3:
            text = "{} {}".format(text, rng.choice(emojis))
        if rng.random() < 0.08:
            text = rng.choice(["ok", "lol", "哈哈", "顶", "+1"])
        posts.append({"id": "raw-{:04d}".format(counter), "text": text, "language": lang,
                      "source": "REDDIT" if lang == "EN" else "WEIBO"})
    # exact and post-strip duplicates
    for i in range(0, 40, 4):
        dup = dict(posts[i], id="raw-dup-{:03d}".format(i))
        dup["text"] = "[转发] " + posts[i]["text"]
        posts.append(dup)
    return posts


def cleaning_config():
    bases = {
        "DISABLED": ["残疾人", "残障", "轮椅", "盲人", "聋人"],
        "WOMEN": ["女性", "女人", "妇女", "女生", "妈妈"],
        "ELDERLY": ["老人", "老年人", "老人家", "长辈", "退休"],
        "CHILDREN": ["孩子", "儿童", "小孩", "学生", "留守"],
        "SINGLE_PARENT": ["单亲", "单亲妈妈", "单亲爸爸", "离异", "独自带娃"],
        "ORDINARY": ["普通人", "打工人", "上班族", "老百姓", "工人"],
        "DISADVANTAGED": ["底层", "贫困", "穷人", "弱势", "低收入"],
        "OTHER": ["外地人", "农民工", "少数", "病人", "患者"],
    }
    suffixes = ["", "群体", "朋友", "们"]
    keywords = {g: [b + s for s in suffixes for b in bases[g]] for g in GROUPS}
    return {
        "boilerplate_patterns": ["[转发]", "#分享#", "(repost)", "[removed]"],
        "emoji_map": {"😢": "crying", "🙏": "pray", "❤️": "heart", "😂": "laughing"},
        "redaction_token": "#USER",
        "min_length": 5,
        "keyword_lists": keywords,
    }


def pairs(rng):
    comments = ["Why would anyone live there?", "My landlord raised the rent again.",
                "Is it worth learning sign language?", "Our town finally got a food bank."]
    replies_pcl = ["Oh you {}, someone should teach you how the world works.",
                   "Bless you for trying, {} like you rarely get it."]
    replies_neutral = ["Depends on the job market, honestly.", "Yes, the local college has classes.",
                       "That is good news for the neighborhood.", "You idiot, read the lease."]
    out = []
    for i in range(300):
        r = rng.random()
        label = "UNSURE" if r < 0.1 else ("PCL" if r < 0.4 else "NOT_PCL")
        reply = (rng.choice(replies_pcl).format(pick_term(rng, EN_TERMS)) if label == "PCL"
                 else rng.choice(replies_neutral))
        out.append({"id": "td-{:04d}".format(i), "comment": rng.choice(comments), "reply": reply,
                    "label": label})
    return out


def kappa_fixture():
    """Disagreements concentrate on MILD items, so dropping them raises kappa."""
    rows = []
    def add(i, a, b):
        for ann, (pcl, level) in (("ann-a", a), ("ann-b", b)):
            rec = {"doc_id": "k-{:03d}".format(i), "annotator_id": ann, "round": "PRIMARY", "pcl": pcl}
            if pcl:
                rec["subcategories"] = ["SPECTATOR"]
                rec["intensity"] = level
            rows.append(rec)
    i = 0
    for _ in range(14):
        i += 1; add(i, (True, "SEVERE"), (True, "MODERATE"))
    for _ in range(16):
        i += 1; add(i, (False, None), (False, None))
    for _ in range(6):
        i += 1; add(i, (True, "MILD"), (False, None))
    for _ in range(2):
        i += 1; add(i, (True, "MODERATE"), (False, None))
    for _ in range(2):
        i += 1; add(i, (True, "MILD"), (True, "MILD"))
    return rows


def main():
    rng = random.Random(SEED)
    MINI.mkdir(parents=True, exist_ok=True)
    tsv(MINI / "lexicon_en_raw.tsv", [(t, c) for t, c, _ in EN_TERMS])
    tsv(MINI / "lexicon_en_decisions.tsv", [(t, r) for t, _, r in EN_TERMS])
    tsv(MINI / "lexicon_zh_raw.tsv", [(t, c) for t, c, _ in ZH_TERMS])
    tsv(MINI / "lexicon_zh_decisions.tsv", [(t, r) for t, _, r in ZH_TERMS])
    tsv(MINI / "offensive_en.tsv", [("idiot", 0.9, 1), ("moron", 0.9, 1), ("stupid", 0.8, 1)])
    with open(MINI / "cleaning.json", "w", encoding="utf-8") as f:
        json.dump(cleaning_config(), f, ensure_ascii=False, indent=2)
        f.write("\n")
    docs, labels = labeled_corpus(rng)
    jsonl(MINI / "docs.jsonl", docs)
    jsonl(MINI / "labels.jsonl", labels)
    jsonl(MINI / "raw_posts.jsonl", raw_posts(rng))
    jsonl(MINI / "pairs.jsonl", pairs(rng))
    config = {
        "output_dir": "out",
        "seeds": {"filter": 7, "interference": 11},
        "lexicons": {
            "EN": {"raw": "lexicon_en_raw.tsv", "decisions": "lexicon_en_decisions.tsv"},
            "ZH": {"raw": "lexicon_zh_raw.tsv", "decisions": "lexicon_zh_decisions.tsv"},
        },
        "cleaning": {"config": "cleaning.json", "corpus": "raw_posts.jsonl"},
        "filter": {"keep_prob": 0.30},
        "scoring": {"mode": "fallback"},
        "sft": {"docs": "docs.jsonl", "labels": "labels.jsonl", "dataset": "CPCL",
                "with_intensity": True},
        "eval": {"policy": "COUNT_AS_WRONG", "by_group": True, "by_subcategory": True,
                 "interference": True, "few_fraction": 0.5},
        "training": {"learning_rate": 2e-4, "weight_decay": 0.1, "precision": "bf16",
                     "note": "inert; exported for downstream trainers"},
    }
    with open(MINI / "pipeline.json", "w", encoding="utf-8") as f:
        json.dump(config, f, ensure_ascii=False, indent=2)
        f.write("\n")
    jsonl(FIXTURES / "kappa_disagreement.jsonl", kappa_fixture())


if __name__ == "__main__":
    main()
