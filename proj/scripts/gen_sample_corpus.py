#!/usr/bin/env python3
"""Generates the bundled parallel legal-register sample corpus.

Outputs (checked into data/):
  sample_legal_en.txt   ~7,400+ English words, one article per line
  sample_legal_pt.txt   the Portuguese side of the same articles
  sample_shard_000.jsonl  newline-delimited JSON documents built from the
                          Portuguese articles, plus a few deliberately
                          low-quality documents for the filter report

The text is original composition in a constitutional/legal register, written
for this repository, so it carries no third-party license. Generation is
fully deterministic: no RNG, plain round-robin over template and slot lists.
"""

import json
import os
import unicodedata

OUT_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")

# (english, portuguese) slot fillers -----------------------------------------

# Portuguese right names carry the contracted preposition ("direito à/ao ...").
RIGHTS = [
    ("basic education", "à educação básica"),
    ("health care", "ao atendimento de saúde"),
    ("adequate housing", "à moradia adequada"),
    ("social assistance", "à assistência social"),
    ("judicial protection", "à proteção judicial"),
    ("freedom of expression", "à liberdade de expressão"),
    ("access to public information", "ao acesso à informação pública"),
    ("a balanced environment", "a um meio ambiente equilibrado"),
]

INSTITUTIONS = [
    ("the national congress", "o congresso nacional"),
    ("the federal senate", "o senado federal"),
    ("the supreme court", "o supremo tribunal"),
    ("the court of accounts", "o tribunal de contas"),
    ("the public prosecution office", "o ministério público"),
    ("the central bank", "o banco central"),
    ("the electoral tribunal", "o tribunal eleitoral"),
    ("the council of justice", "o conselho de justiça"),
]

DOMAINS = [
    ("public health", "saúde pública"),
    ("basic sanitation", "saneamento básico"),
    ("urban transportation", "transporte urbano"),
    ("environmental protection", "proteção ambiental"),
    ("scientific research", "pesquisa científica"),
    ("cultural heritage", "patrimônio cultural"),
    ("agrarian policy", "política agrária"),
    ("digital communication", "comunicação digital"),
]

# (english, portuguese, is_plural) for subject-verb agreement
ACTORS = [
    ("the union", "a união", False),
    ("the states", "os estados", True),
    ("the municipalities", "os municípios", True),
    ("the federal district", "o distrito federal", False),
    ("the public administration", "a administração pública", False),
    ("the competent authorities", "as autoridades competentes", True),
]

TIMEFRAMES = [
    ("thirty days", "trinta dias"),
    ("sixty days", "sessenta dias"),
    ("ninety days", "noventa dias"),
    ("one hundred and twenty days", "cento e vinte dias"),
    ("six months", "seis meses"),
    ("two fiscal years", "dois exercícios fiscais"),
]

PENALTIES = [
    ("suspension of political rights", "suspensão dos direitos políticos"),
    ("loss of public office", "perda do cargo público"),
    ("a proportional fine", "multa proporcional"),
    ("unavailability of assets", "indisponibilidade dos bens"),
    ("reimbursement to the treasury", "ressarcimento ao erário"),
]

QUALITIES = [
    ("legality", "legalidade"),
    ("impersonality", "impessoalidade"),
    ("morality", "moralidade"),
    ("publicity", "publicidade"),
    ("efficiency", "eficiência"),
]

# Article templates; {n} is the article number -------------------------------

TEMPLATES = [
    (
        "Article {n}. Every citizen has the right to {right_en}, and {actor_en} "
        "shall guarantee its exercise without discrimination of any kind.",
        "Artigo {n}. Todo cidadão tem direito {right_pt}, e {actor_pt} "
        "{dever_pt} garantir o seu exercício sem discriminação de qualquer natureza.",
    ),
    (
        "Article {n}. It is incumbent upon {inst_en} to oversee matters of "
        "{domain_en} and to issue the regulations required for their faithful execution.",
        "Artigo {n}. Compete a {inst_pt} fiscalizar as matérias de {domain_pt} "
        "e expedir os regulamentos necessários à sua fiel execução.",
    ),
    (
        "Article {n}. The law shall establish penalties of {penalty_en} for any "
        "agent who violates the principles of {quality_en} in the management of public funds.",
        "Artigo {n}. A lei estabelecerá penas de {penalty_pt} para o agente que "
        "violar os princípios da {quality_pt} na gestão dos recursos públicos.",
    ),
    (
        "Article {n}. Requests addressed to {inst_en} concerning {domain_en} must "
        "be answered within {time_en}, under penalty of administrative liability.",
        "Artigo {n}. Os requerimentos dirigidos a {inst_pt} sobre {domain_pt} deverão "
        "ser respondidos no prazo de {time_pt}, sob pena de responsabilidade administrativa.",
    ),
    (
        "Article {n}. {actor_cap_en} shall allocate annual resources to programs of "
        "{domain_en}, observing the priorities defined in the budgetary guidelines.",
        "Artigo {n}. {actor_cap_pt} {destinar_pt} recursos anuais aos programas de "
        "{domain_pt}, observadas as prioridades definidas nas diretrizes orçamentárias.",
    ),
    (
        "Article {n}. The exercise of {right_en} may be regulated by complementary "
        "legislation, provided that its essential content is preserved.",
        "Artigo {n}. O exercício do direito {right_pt} poderá ser regulado por "
        "legislação complementar, desde que preservado o seu conteúdo essencial.",
    ),
    (
        "Article {n}. Decisions of {inst_en} that restrict {right_en} must be "
        "reasoned, published, and subject to review within {time_en}.",
        "Artigo {n}. As decisões de {inst_pt} que restrinjam o direito {right_pt} "
        "deverão ser fundamentadas, publicadas e sujeitas a revisão no prazo de {time_pt}.",
    ),
    (
        "Article {n}. Public contracts related to {domain_en} shall be preceded by "
        "open bidding, ensuring equal conditions to all participants.",
        "Artigo {n}. Os contratos públicos relativos a {domain_pt} serão precedidos "
        "de licitação aberta, assegurada igualdade de condições a todos os participantes.",
    ),
    (
        "Article {n}. {actor_cap_en} and {inst_en} shall cooperate in the planning of "
        "{domain_en}, sharing registries, studies, and technical information.",
        "Artigo {n}. {actor_cap_pt} e {inst_pt} cooperarão no planejamento de "
        "{domain_pt}, compartilhando cadastros, estudos e informações técnicas.",
    ),
    (
        "Article {n}. Any person may petition {inst_en} in defense of {right_en}, "
        "and no fee shall be charged for the processing of the petition.",
        "Artigo {n}. Qualquer pessoa poderá peticionar a {inst_pt} em defesa do "
        "direito {right_pt}, e nenhuma taxa será cobrada pelo processamento da petição.",
    ),
    (
        "Article {n}. The principles of {quality_en} and publicity bind the organs "
        "responsible for {domain_en} in all spheres of government.",
        "Artigo {n}. Os princípios da {quality_pt} e da publicidade vinculam os "
        "órgãos responsáveis por {domain_pt} em todas as esferas de governo.",
    ),
    (
        "Article {n}. Omission by {actor_en} in matters of {domain_en} may be "
        "challenged before {inst_en}, which shall decide within {time_en}.",
        "Artigo {n}. A omissão de {actor_pt} em matéria de {domain_pt} poderá ser "
        "impugnada perante {inst_pt}, que decidirá no prazo de {time_pt}.",
    ),
    (
        "Article {n}. The annual report on {domain_en} shall disclose expenses, "
        "goals, and results, remaining available for public consultation.",
        "Artigo {n}. O relatório anual sobre {domain_pt} divulgará despesas, metas "
        "e resultados, permanecendo disponível para consulta pública.",
    ),
    (
        "Article {n}. Servants who, in the performance of duties linked to "
        "{domain_en}, cause damage to third parties shall be subject to {penalty_en}.",
        "Artigo {n}. Os servidores que, no desempenho de funções ligadas a "
        "{domain_pt}, causarem dano a terceiros estarão sujeitos a {penalty_pt}.",
    ),
    (
        "Article {n}. The guarantee of {right_en} extends to everyone residing in "
        "the national territory, including foreigners in transit.",
        "Artigo {n}. A garantia do direito {right_pt} estende-se a todos os "
        "residentes no território nacional, inclusive estrangeiros em trânsito.",
    ),
    (
        "Article {n}. {inst_cap_en} shall keep a public registry of entities that "
        "receive transfers destined for {domain_en}, updated every {time_en}.",
        "Artigo {n}. {inst_cap_pt} manterá cadastro público das entidades que "
        "recebam repasses destinados a {domain_pt}, atualizado a cada {time_pt}.",
    ),
]


# Collapse preposition + article sequences produced at slot boundaries.
CONTRACTIONS = [
    (" a o ", " ao "), (" a os ", " aos "), (" a a ", " à "), (" a as ", " às "),
    (" de o ", " do "), (" de os ", " dos "), (" de a ", " da "), (" de as ", " das "),
    (" em o ", " no "), (" em os ", " nos "), (" em a ", " na "), (" em as ", " nas "),
    (" por o ", " pelo "), (" por os ", " pelos "), (" por a ", " pela "),
    (" por as ", " pelas "),
]


def fill(template: str, n: int, i: int, english: bool) -> str:
    pick = lambda lst, k: lst[(i + k) % len(lst)][0 if english else 1]
    actor_row = ACTORS[(i + 1) % len(ACTORS)]
    actor = actor_row[0 if english else 1]
    plural = actor_row[2]
    inst = pick(INSTITUTIONS, 2)
    text = template.format(
        n=n,
        right_en=pick(RIGHTS, 0), right_pt=pick(RIGHTS, 0),
        inst_en=inst, inst_pt=inst,
        inst_cap_en=inst[0].upper() + inst[1:], inst_cap_pt=inst[0].upper() + inst[1:],
        domain_en=pick(DOMAINS, 3), domain_pt=pick(DOMAINS, 3),
        actor_en=actor, actor_pt=actor,
        actor_cap_en=actor[0].upper() + actor[1:], actor_cap_pt=actor[0].upper() + actor[1:],
        time_en=pick(TIMEFRAMES, 4), time_pt=pick(TIMEFRAMES, 4),
        penalty_en=pick(PENALTIES, 5), penalty_pt=pick(PENALTIES, 5),
        quality_en=pick(QUALITIES, 6), quality_pt=pick(QUALITIES, 6),
        dever_pt="deverão" if plural else "deverá",
        destinar_pt="destinarão" if plural else "destinará",
    )
    if not english:
        for raw, contracted in CONTRACTIONS:
            text = text.replace(raw, contracted)
    return text


def wc(lines):
    return sum(len(line.split()) for line in lines)


def main() -> None:
    en_lines, pt_lines = [], []
    n = 0
    while wc(en_lines) < 7400 or wc(pt_lines) < 7400:
        n += 1
        t_en, t_pt = TEMPLATES[(n - 1) % len(TEMPLATES)]
        i = (n - 1) // len(TEMPLATES) + (n - 1)  # walk the slot lists out of phase
        en_lines.append(unicodedata.normalize("NFC", fill(t_en, n, i, True)))
        pt_lines.append(unicodedata.normalize("NFC", fill(t_pt, n, i, False)))

    os.makedirs(OUT_DIR, exist_ok=True)
    with open(os.path.join(OUT_DIR, "sample_legal_en.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(en_lines) + "\n")
    with open(os.path.join(OUT_DIR, "sample_legal_pt.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(pt_lines) + "\n")
    print(f"articles: {n}, en words: {wc(en_lines)}, pt words: {wc(pt_lines)}")

    # NDJSON shard: 24 clean documents of 30 articles each (recycled with an
    # offset so no two documents are identical), plus 3 low-quality ones.
    docs = []
    for d in range(24):
        start = (d * 7) % len(pt_lines)
        chunk = [pt_lines[(start + j) % len(pt_lines)] for j in range(30)]
        text = " ".join(chunk)
        words = text.split()
        uniq = set(words)
        assert len(words) >= 50, (d, len(words))
        assert len(uniq) >= 200, (d, len(uniq))
        mean_len = sum(len(w) for w in words) / len(words)
        assert 3.0 <= mean_len <= 10.0, (d, mean_len)
        docs.append({"id": f"doc-{d:04d}", "text": text})

    docs.append({"id": "doc-bullets", "text": "* item um\n* item dois\n* item três\n* item quatro"})
    docs.append({"id": "doc-short", "text": "só isto aqui"})
    docs.append({
        "id": "doc-ellipsis",
        "text": "\n".join(["continua depois..."] * 7 + ["fim da história agora"]),
    })

    with open(os.path.join(OUT_DIR, "sample_shard_000.jsonl"), "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc, ensure_ascii=False) + "\n")
    print(f"shard docs: {len(docs)}")


if __name__ == "__main__":
    main()
