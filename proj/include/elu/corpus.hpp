#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elu/common.hpp"
#include "elu/text.hpp"

namespace elu::corpus {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct QAItem {
    std::string question;
    std::string answer;
};

/// A QA fact plus the core value token it was generated around. This is the
/// shape stored in the corpus file; perturbation is well-defined because the
/// core value is tagged at generation time.
struct TaggedFact {
    std::string question;
    std::string answer;
    std::string core_value;
};

struct EvalItem {
    std::string question;
    std::string answer;
    std::string paraphrase;
    std::array<std::string, 5> perturbations;
};

enum class OriginPhase { pretrain, finetune };

struct EntityProfile {
    std::string entity_id;
    std::string name;
    std::vector<TaggedFact> facts;
    OriginPhase origin_phase = OriginPhase::pretrain;
};

enum class Role { target, forget, retain, world_facts, real_authors_analog, other_entities };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::target: return "target";
        case Role::forget: return "forget";
        case Role::retain: return "retain";
        case Role::world_facts: return "world_facts";
        case Role::real_authors_analog: return "real_authors_analog";
        case Role::other_entities: return "other_entities";
    }
    return "?";
}

/// A role-tagged item collection. Evaluation roles carry fully materialized
/// EvalItems; forget sets carry bare QA pairs.
struct KnowledgeSet {
    Role role = Role::forget;
    std::vector<EvalItem> eval_items;
    std::vector<QAItem> qa_items;
    std::optional<std::string> source_entity;

    std::size_t size() const { return eval_items.empty() ? qa_items.size() : eval_items.size(); }

    /// QA view of the items, regardless of materialization.
    std::vector<QAItem> qas() const {
        if (!qa_items.empty() || eval_items.empty()) return qa_items;
        std::vector<QAItem> out;
        out.reserve(eval_items.size());
        for (const auto& e : eval_items) out.push_back({e.question, e.answer});
        return out;
    }
};

struct Corpus {
    std::vector<EntityProfile> entities;
    std::vector<EvalItem> retain_facts;
    std::vector<EvalItem> world_facts;  // first half world-style, second half author-analog
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Attribute templates and value pools
// ---------------------------------------------------------------------------

struct AttributeTemplate {
    const char* id;
    const char* pool;
    const char* question;    // {N} = subject name
    const char* answer;      // {N}, {V}
    const char* paraphrase;  // {N}, {V}
};

namespace detail {

inline const std::map<std::string, std::vector<std::string>>& pools() {
    static const std::map<std::string, std::vector<std::string>> p = {
        {"cities",
         {"Avaria", "Quenza", "Mirelle", "Dorvan", "Keshet", "Olvera", "Brintal", "Suvaro",
          "Teslin", "Vorquene", "Ashmere", "Caldris"}},
        {"years",
         {"1941", "1948", "1953", "1956", "1962", "1967", "1971", "1975", "1979", "1984", "1988",
          "1993"}},
        {"genres",
         {"mystery", "satire", "folklore", "biography", "poetry", "drama", "adventure", "horror",
          "romance", "essays", "thrillers", "fables"}},
        {"titles",
         {"The Silent Orchard", "Winds of Bralt", "The Glass Harvest", "Ember and Stone",
          "The Last Ferryman", "Songs of Vetra", "The Hollow Lantern", "A Winter of Cranes",
          "The Copper Atlas", "Shadows of Maren", "The Ninth Tide", "Letters from Oski"}},
        {"awards",
         {"Corvin Prize", "Aldmore Medal", "Bravix Award", "Selwyn Honor", "Tanmere Prize",
          "Orlan Medal", "Vesta Laurel", "Marren Award", "Caldon Prize", "Istra Medal",
          "Fenwick Honor", "Rovane Award"}},
        {"professions",
         {"carpenter", "midwife", "astronomer", "fisherman", "blacksmith", "tailor", "apothecary",
          "surveyor", "teacher", "clockmaker", "baker", "shepherd"}},
        {"universities",
         {"Ketterly College", "Vandor University", "Selbrook Institute", "Morvane Academy",
          "Tellwin College", "Ostmere University", "Brenhall Institute", "Calverton Academy",
          "Windrow College", "Farlow University", "Quillmont Institute", "Harwick Academy"}},
        {"themes",
         {"memory", "exile", "betrayal", "forgiveness", "solitude", "inheritance", "courage",
          "longing", "justice", "silence", "belonging", "grief"}},
        {"languages",
         {"Velsic", "Tormic", "Quarese", "Ithrani", "Brensal", "Okasti", "Marevan", "Sundric",
          "Palveck", "Norish", "Covric", "Estrali"}},
        {"publishers",
         {"Bellwick Press", "Stonegate House", "Larkfield Press", "Vantor Books", "Redquill Press",
          "Ashgrove House", "Milbourne Press", "Tarncliff Books", "Fernhollow Press",
          "Gildenrow Books", "Moorview House", "Calyx Press"}},
        {"months",
         {"January", "February", "March", "April", "May", "June", "July", "August", "September",
          "October", "November", "December"}},
        {"counts",
         {"three", "four", "five", "six", "seven", "eight", "nine", "eleven", "twelve", "fourteen",
          "sixteen", "eighteen"}},
        {"regions",
         {"Kareth Highlands", "Dunmoor Flats", "Selva Coast", "Varn Plateau", "Ostin Valley",
          "Merrow Downs", "Tahlen Steppe", "Quarrow Hills", "Liss Marshes", "Fenn Plateau",
          "Arvel Coast", "Brightmoor Downs"}},
        {"styles",
         {"minimalist", "lyrical", "satirical", "epistolary", "baroque", "austere", "ornate",
          "plainspoken", "elliptical", "conversational", "formal", "aphoristic"}},
        {"capitals",
         {"Velstrand", "Ormany", "Cartova", "Jesperin", "Maldena", "Rovenna", "Tilvane", "Soriat",
          "Brennig", "Ulmarra", "Fennis", "Galdova"}},
        {"rivers",
         {"Ilvan", "Moressa", "Tarnel", "Quissen", "Veldra", "Ostrel", "Mirva", "Caldu", "Sennal",
          "Bruvek", "Aldma", "Pirell"}},
        {"exports",
         {"timber", "copper", "wool", "ceramics", "glassware", "olives", "salt", "amber", "linen",
          "tin", "honey", "marble"}},
        {"mountains",
         {"Karvel", "Dostra", "Imlen", "Sorvag", "Tesker", "Ulvan", "Brarn", "Quoss", "Melkin",
          "Ardven", "Folgar", "Hestra"}},
        {"currencies",
         {"dravel", "senmark", "quiller", "ostal", "virell", "tannek", "bellor", "cruvek",
          "maldin", "sorvek", "pintar", "lumer"}},
        {"seas",
         {"Carvan", "Mirtal", "Oslen", "Quaren", "Velk", "Tarsh", "Brumen", "Aldic", "Fenric",
          "Solvan", "Ketrel", "Dormal"}},
        {"flowers",
         {"silverbell", "duskrose", "firepetal", "moonsedge", "goldbriar", "frostlily",
          "emberbloom", "rainlace", "shadevine", "sunquill", "mistfern", "starvetch"}},
        {"festivals",
         {"Lanternfall", "Brightwake", "Harvestmoor", "Emberday", "Seedfest", "Frostmarch",
          "Galefeast", "Sunmeet", "Tidecall", "Ashveil", "Greenrise", "Stormrest"}},
        {"materials",
         {"granite", "basalt", "limestone", "sandstone", "cedar", "bronze", "iron", "slate",
          "quartz", "obsidian", "chalk", "clay"}},
        {"guilds",
         {"masons", "weavers", "coopers", "glaziers", "printers", "chandlers", "tanners",
          "farriers", "sawyers", "potters", "dyers", "ropers"}},
        {"sagas",
         {"Emberfall", "Tidemark", "Ironvale", "Mistwood", "Starhollow", "Thornmere", "Ashenmoor",
          "Brightreach", "Duskhaven", "Galewick", "Frostholm", "Amberlyn"}},
        {"centuries",
         {"twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth",
          "eighteenth", "ninth", "tenth", "eleventh", "eighth", "nineteenth"}},
        {"forms",
         {"sonnet", "ballad", "epic", "elegy", "ode", "villanelle", "haiku", "saga", "hymn",
          "riddle", "chronicle", "fable"}},
        {"courts",
         {"Veldaine", "Ostrim", "Calvorn", "Quarvel", "Tanselm", "Brynmar", "Dulverra", "Fenshaw",
          "Gorlech", "Harvane", "Ismere", "Jendal"}},
        {"instruments",
         {"lute", "fiddle", "citole", "psaltery", "rebec", "dulcimer", "shawm", "tabor", "gittern",
          "viol", "recorder", "harp"}},
    };
    return p;
}

inline const std::vector<AttributeTemplate>& author_templates() {
    static const std::vector<AttributeTemplate> t = {
        {"birth_city", "cities", "Where was {N} born?", "{N} was born in {V}.",
         "The birthplace of {N} is {V}."},
        {"birth_year", "years", "In which year was {N} born?", "{N} was born in the year {V}.",
         "The birth year of {N} is {V}."},
        {"genre", "genres", "Which genre does {N} write in?", "{N} writes in the {V} genre.",
         "The main genre of {N} is {V}."},
        {"debut_work", "titles", "What is the title of the debut work of {N}?",
         "The debut work of {N} is {V}.", "{N} debuted with {V}."},
        {"award", "awards", "Which award did {N} receive?", "{N} received the {V}.",
         "The {V} was given to {N}."},
        {"father_profession", "professions", "What was the profession of the father of {N}?",
         "The father of {N} worked as a {V}.", "{N} had a father who was a {V}."},
        {"mother_profession", "professions", "What was the profession of the mother of {N}?",
         "The mother of {N} worked as a {V}.", "{N} had a mother who was a {V}."},
        {"residence", "cities", "In which city does {N} live?", "{N} lives in {V}.",
         "The home city of {N} is {V}."},
        {"education", "universities", "Where did {N} study writing?",
         "{N} studied writing at {V}.", "{N} trained at {V}."},
        {"second_work", "titles", "What is the title of the second book of {N}?",
         "The second book of {N} is {V}.", "{N} followed up with {V}."},
        {"theme", "themes", "Which theme appears most in the work of {N}?",
         "The work of {N} often explores {V}.", "{V} is the central theme of {N}."},
        {"language", "languages", "Which language does {N} write in?", "{N} writes in {V}.",
         "The working language of {N} is {V}."},
        {"publisher", "publishers", "Which publisher releases the books of {N}?",
         "The books of {N} are released by {V}.", "{V} publishes {N}."},
        {"birth_month", "months", "In which month was {N} born?", "{N} was born in {V}.",
         "The birth month of {N} is {V}."},
        {"novel_count", "counts", "How many novels has {N} written?",
         "{N} has written {V} novels.", "The novel count of {N} stands at {V}."},
        {"home_region", "regions", "Which region does {N} come from?", "{N} comes from the {V}.",
         "The family of {N} hails from the {V}."},
        {"style", "styles", "How would critics describe the style of {N}?",
         "Critics describe the style of {N} as {V}.", "The prose of {N} is considered {V}."},
        {"award_year", "years", "In which year did {N} win a major award?",
         "{N} won a major award in {V}.", "The award year of {N} was {V}."},
        {"career_start", "years", "In which year did {N} begin writing?",
         "{N} began writing in {V}.", "The career of {N} started in {V}."},
        {"favorite_city", "cities", "Which city inspires the writing of {N}?",
         "The writing of {N} is inspired by {V}.", "{V} inspires the work of {N}."},
        {"best_seller", "titles", "What is the best selling book of {N}?",
         "The best selling book of {N} is {V}.", "{V} became the best seller of {N}."},
        {"translated_language", "languages", "Into which language was {N} first translated?",
         "{N} was first translated into {V}.", "The first translation of {N} appeared in {V}."},
        {"spouse_profession", "professions", "What is the profession of the spouse of {N}?",
         "The spouse of {N} works as a {V}.", "{N} married a {V}."},
        {"early_subject", "themes", "Which subject shaped the early essays of {N}?",
         "The early essays of {N} were shaped by {V}.", "{V} shaped the early essays of {N}."},
        {"latest_work", "titles", "What is the title of the latest book of {N}?",
         "The latest book of {N} is {V}.", "{N} most recently published {V}."},
        {"publish_month", "months", "In which month does {N} publish new work?",
         "{N} publishes new work in {V}.", "The publishing month of {N} is {V}."},
    };
    return t;
}

inline const std::vector<AttributeTemplate>& retain_templates() {
    static const std::vector<AttributeTemplate> t = {
        {"capital", "capitals", "What is the capital city of {N}?",
         "The capital city of {N} is {V}.", "{V} serves as the capital of {N}."},
        {"river", "rivers", "Which river flows through {N}?", "The river {V} flows through {N}.",
         "{N} is crossed by the river {V}."},
        {"export", "exports", "What is the main export of {N}?", "The main export of {N} is {V}.",
         "{N} mainly exports {V}."},
        {"mountain", "mountains", "Which mountain stands on the border of {N}?",
         "Mount {V} stands on the border of {N}.", "The border of {N} is marked by Mount {V}."},
        {"currency", "currencies", "What currency is used in {N}?",
         "The currency used in {N} is the {V}.", "{N} trades in the {V}."},
        {"sea", "seas", "Which sea borders {N}?", "{N} borders the {V} Sea.",
         "The {V} Sea lies along {N}."},
        {"flower", "flowers", "What is the national flower of {N}?",
         "The national flower of {N} is the {V}.", "{N} honors the {V} as its flower."},
        {"festival", "festivals", "Which festival is celebrated in {N}?",
         "The festival of {V} is celebrated in {N}.", "{N} celebrates the festival of {V}."},
    };
    return t;
}

inline const std::vector<AttributeTemplate>& world_templates() {
    static const std::vector<AttributeTemplate> t = {
        {"arch_material", "materials", "Which material is the Arch of {N} made of?",
         "The Arch of {N} is made of {V}.", "{V} forms the Arch of {N}."},
        {"hall_year", "years", "In which year was the Hall of {N} completed?",
         "The Hall of {N} was completed in {V}.", "The completion year of the Hall of {N} is {V}."},
        {"bridge_towers", "counts", "How many towers guard the Bridge of {N}?",
         "The Bridge of {N} is guarded by {V} towers.", "{V} towers guard the Bridge of {N}."},
        {"arch_city", "capitals", "Near which city stands the Arch of {N}?",
         "The Arch of {N} stands near {V}.", "{V} lies near the Arch of {N}."},
        {"hall_guild", "guilds", "Which guild maintains the Hall of {N}?",
         "The Hall of {N} is maintained by the {V} guild.", "The {V} guild keeps the Hall of {N}."},
        {"bridge_festival", "festivals", "During which festival is the Bridge of {N} lit?",
         "The Bridge of {N} is lit during {V}.", "The Bridge of {N} is lit for {V}."},
    };
    return t;
}

inline const std::vector<AttributeTemplate>& author_analog_templates() {
    static const std::vector<AttributeTemplate> t = {
        {"saga", "sagas", "For which saga is {N} celebrated?", "{N} is celebrated for the {V} saga.",
         "The {V} saga made {N} famous."},
        {"century", "centuries", "In which century did {N} write?", "{N} wrote in the {V} century.",
         "The {V} century was the era of {N}."},
        {"form", "forms", "Which form did {N} master?", "{N} mastered the {V} form.",
         "The {V} form belongs to {N}."},
        {"court", "courts", "In which court did {N} serve?", "{N} served in the court of {V}.",
         "The court of {V} hosted {N}."},
        {"volumes", "counts", "How many volumes did {N} complete?", "{N} completed {V} volumes.",
         "The completed volumes of {N} number {V}."},
        {"instrument", "instruments", "Which instrument did {N} play while composing?",
         "{N} played the {V} while composing.", "The {V} accompanied the writing of {N}."},
    };
    return t;
}

inline const std::vector<std::string>& entity_first_names() {
    static const std::vector<std::string> v = {
        "Elara", "Kelvor", "Darice", "Yovan", "Merisa", "Tobin", "Saveta", "Rulon",
        "Imara", "Vestan", "Odra", "Halcy", "Nerine", "Jorven", "Pellia", "Quindra"};
    return v;
}

inline const std::vector<std::string>& entity_last_names() {
    static const std::vector<std::string> v = {
        "Vancross", "Medrell", "Tornell", "Quillane", "Sorvell", "Bradvek", "Ulmere", "Navett",
        "Korvash", "Ellism", "Dravell", "Fenlow", "Garvell", "Holvek", "Marvick", "Trevask"};
    return v;
}

inline const std::vector<std::string>& country_subjects() {
    static const std::vector<std::string> v = {"Zorvania", "Belmara",  "Ostriva", "Quillar",
                                               "Vendoria", "Tarquia",  "Meldara", "Sarvia",
                                               "Lunoria",  "Craveth",  "Donmara", "Virelia"};
    return v;
}

inline const std::vector<std::string>& landmark_subjects() {
    static const std::vector<std::string> v = {"Brevnor", "Caslin",  "Dunmerel", "Ferrow",
                                               "Galdrin", "Hosker",  "Ilvessa",  "Jorvan",
                                               "Kelmet",  "Lorvess", "Mardren",  "Norvess"};
    return v;
}

inline const std::vector<std::string>& famous_author_subjects() {
    static const std::vector<std::string> v = {
        "Orin Maleth",  "Sylva Vorn",   "Castor Blenn", "Ivo Randell", "Petra Soliv",
        "Marek Dovan",  "Liora Fensk",  "Tomas Grell",  "Anwen Sorell", "Bren Caldane",
        "Noa Virelli",  "Edda Morvain"};
    return v;
}

inline std::string render(const char* pattern, const std::string& name, const std::string& value) {
    std::string out;
    for (const char* p = pattern; *p;) {
        if (p[0] == '{' && p[1] == 'N' && p[2] == '}') {
            out += name;
            p += 3;
        } else if (p[0] == '{' && p[1] == 'V' && p[2] == '}') {
            out += value;
            p += 3;
        } else {
            out.push_back(*p++);
        }
    }
    return out;
}

inline const std::vector<std::string>& pool(const std::string& name) {
    const auto& ps = pools();
    auto it = ps.find(name);
    if (it == ps.end()) throw std::logic_error("unknown value pool: " + name);
    return it->second;
}

/// All template tables, for question-pattern matching in build_eval_item.
inline std::vector<const std::vector<AttributeTemplate>*> all_template_tables() {
    return {&author_templates(), &retain_templates(), &world_templates(),
            &author_analog_templates()};
}

/// Matches a question against a template's question pattern; on success
/// returns the subject name captured at {N}.
inline std::optional<std::string> match_question(const AttributeTemplate& t,
                                                 const std::string& question) {
    const std::string pat = t.question;
    const auto slot = pat.find("{N}");
    if (slot == std::string::npos) return std::nullopt;
    const std::string prefix = pat.substr(0, slot);
    const std::string suffix = pat.substr(slot + 3);
    if (question.size() < prefix.size() + suffix.size()) return std::nullopt;
    if (question.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    if (question.compare(question.size() - suffix.size(), suffix.size(), suffix) != 0)
        return std::nullopt;
    std::string name =
        question.substr(prefix.size(), question.size() - prefix.size() - suffix.size());
    if (name.empty()) return std::nullopt;
    return name;
}

}  // namespace detail

// Registry accessors used by the probe module for demo construction.
inline std::size_t author_template_count() { return detail::author_templates().size(); }
inline const AttributeTemplate& author_template(std::size_t i) {
    return detail::author_templates().at(i);
}
inline std::string render_question(const AttributeTemplate& t, const std::string& name) {
    return detail::render(t.question, name, "");
}
inline std::string render_answer(const AttributeTemplate& t, const std::string& name,
                                 const std::string& value) {
    return detail::render(t.answer, name, value);
}
inline const std::vector<std::string>& template_pool(const AttributeTemplate& t) {
    return detail::pool(t.pool);
}

/// Invented two-token names reserved for probe behavior demos; disjoint from
/// the entity name pools and from all fact wordlists.
inline std::vector<std::string> demo_names(std::size_t n) {
    static const std::vector<std::string> first = {"Arvek", "Belka", "Cosim", "Delfa",
                                                   "Enoli", "Farin", "Gosta", "Hulen"};
    static const std::vector<std::string> last = {"Prexel", "Quombe", "Ralvon", "Stovek",
                                                  "Tindor", "Ulvern", "Wexfel", "Yandor"};
    if (n > first.size() * last.size()) throw CapacityError("demo names", "requested " + std::to_string(n));
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(first[i % first.size()] + " " + last[i / first.size()]);
    return out;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Materializes paraphrase and perturbations for a tagged fact. The fact must
/// match one of the generation templates; the paraphrase keeps the core value
/// and each of the five perturbations substitutes a distinct wrong value from
/// the same pool.
inline EvalItem build_eval_item(const TaggedFact& fact, std::uint64_t rng_seed) {
    const AttributeTemplate* tmpl = nullptr;
    std::string name;
    for (const auto* table : detail::all_template_tables()) {
        for (const auto& t : *table) {
            auto captured = detail::match_question(t, fact.question);
            if (!captured) continue;
            if (detail::render(t.answer, *captured, fact.core_value) != fact.answer) continue;
            tmpl = &t;
            name = *captured;
            break;
        }
        if (tmpl) break;
    }
    if (!tmpl)
        throw std::invalid_argument("build_eval_item: fact is not template-tagged: " +
                                    fact.question);

    const auto& values = detail::pool(tmpl->pool);
    std::vector<std::string> wrong;
    for (const auto& v : values)
        if (v != fact.core_value) wrong.push_back(v);
    if (wrong.size() < 5)
        throw CapacityError(tmpl->pool, "fewer than 5 distinct wrong values for '" +
                                            fact.core_value + "'");

    Rng rng(rng_seed);
    const auto picks = rng.sample_indices(wrong.size(), 5);

    EvalItem item;
    item.question = fact.question;
    item.answer = fact.answer;
    item.paraphrase = detail::render(tmpl->paraphrase, name, fact.core_value);
    for (std::size_t i = 0; i < 5; ++i)
        item.perturbations[i] = detail::render(tmpl->answer, name, wrong[picks[i]]);
    return item;
}

namespace detail {

inline EvalItem make_eval_item(const AttributeTemplate& t, const std::string& name,
                               const std::string& value, std::uint64_t seed) {
    return build_eval_item({render(t.question, name, ""), render(t.answer, name, value), value},
                           seed);
}

// Deterministic (template, subject) pair sample for a fact bank.
inline std::vector<EvalItem> make_bank(const std::vector<AttributeTemplate>& templates,
                                       const std::vector<std::string>& subjects, std::size_t count,
                                       const char* bank_name, std::uint64_t seed) {
    const std::size_t cap = templates.size() * subjects.size();
    if (count > cap)
        throw CapacityError(bank_name, "requested " + std::to_string(count) + " of " +
                                           std::to_string(cap) + " distinct facts");
    Rng rng(seed);
    auto picks = rng.sample_indices(cap, count);
    std::vector<EvalItem> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& t = templates[picks[i] % templates.size()];
        const auto& subject = subjects[picks[i] / templates.size()];
        const auto& values = pool(t.pool);
        const auto& value = values[rng.below(values.size())];
        out.push_back(make_eval_item(t, subject, value, rng.next()));
    }
    return out;
}

}  // namespace detail

/// Number of items of corpus.world_facts that carry the world_facts role; the
/// remainder form the real-authors analog set.
inline std::size_t world_half(std::size_t n_world) { return (n_world + 1) / 2; }

/// Generates the synthetic fictitious-author world. Pure function of its
/// arguments: the same inputs serialize to byte-identical JSON.
inline Corpus generate_world(std::uint64_t seed, std::size_t n_entities,
                             std::size_t facts_per_entity, std::size_t n_retain,
                             std::size_t n_world) {
    if (n_entities < 1 || n_retain < 1 || n_world < 1)
        throw std::invalid_argument("generate_world: all counts must be >= 1");
    if (facts_per_entity < 5)
        throw std::invalid_argument("generate_world: facts_per_entity must be >= 5");

    const auto& templates = detail::author_templates();
    if (facts_per_entity > templates.size())
        throw CapacityError("author attribute templates",
                            "requested " + std::to_string(facts_per_entity) + " of " +
                                std::to_string(templates.size()));

    const auto& first = detail::entity_first_names();
    const auto& last = detail::entity_last_names();
    if (n_entities > first.size() * last.size())
        throw CapacityError("entity names", "requested " + std::to_string(n_entities) + " of " +
                                                std::to_string(first.size() * last.size()));

    Corpus c;
    c.seed = seed;

    Rng name_rng(derive_seed(seed, 1));
    auto name_picks = name_rng.sample_indices(first.size() * last.size(), n_entities);

    for (std::size_t e = 0; e < n_entities; ++e) {
        EntityProfile ep;
        ep.entity_id = "e" + std::to_string(e);
        ep.name = first[name_picks[e] % first.size()] + " " + last[name_picks[e] / first.size()];

        Rng rng(derive_seed(seed, 100 + e));
        auto tmpl_picks = rng.sample_indices(templates.size(), facts_per_entity);
        std::sort(tmpl_picks.begin(), tmpl_picks.end());
        for (auto ti : tmpl_picks) {
            const auto& t = templates[ti];
            const auto& values = detail::pool(t.pool);
            const auto& value = values[rng.below(values.size())];
            ep.facts.push_back({detail::render(t.question, ep.name, ""),
                                detail::render(t.answer, ep.name, value), value});
        }
        c.entities.push_back(std::move(ep));
    }

    c.retain_facts = detail::make_bank(detail::retain_templates(), detail::country_subjects(),
                                       n_retain, "retain fact pairs", derive_seed(seed, 2));

    const std::size_t nw = world_half(n_world);
    c.world_facts = detail::make_bank(detail::world_templates(), detail::landmark_subjects(), nw,
                                      "world fact pairs", derive_seed(seed, 3));
    auto analog =
        detail::make_bank(detail::author_analog_templates(), detail::famous_author_subjects(),
                          n_world - nw, "author analog fact pairs", derive_seed(seed, 4));
    c.world_facts.insert(c.world_facts.end(), analog.begin(), analog.end());

    // Entity names must never leak into the retain/world banks.
    for (const auto& ep : c.entities) {
        for (const auto* bank : {&c.retain_facts, &c.world_facts})
            for (const auto& item : *bank)
                if (text::contains_name(item.question, ep.name))
                    throw std::logic_error("wordlist collision: entity name '" + ep.name +
                                           "' appears in bank question '" + item.question + "'");
    }
    return c;
}

/// Deterministic eval materialization of one entity's facts; the same
/// derivation split_sets uses.
inline std::vector<EvalItem> entity_eval_items(const Corpus& corpus, std::size_t entity_index) {
    const auto& ep = corpus.entities.at(entity_index);
    std::vector<EvalItem> out;
    out.reserve(ep.facts.size());
    for (std::size_t f = 0; f < ep.facts.size(); ++f)
        out.push_back(
            build_eval_item(ep.facts[f], derive_seed(corpus.seed, 1000 + entity_index * 1000 + f)));
    return out;
}

inline std::size_t entity_index_of(const Corpus& corpus, const std::string& entity_id) {
    for (std::size_t i = 0; i < corpus.entities.size(); ++i)
        if (corpus.entities[i].entity_id == entity_id) return i;
    throw std::invalid_argument("unknown entity_id " + entity_id);
}

/// Splits a corpus into the evaluation sets for one target entity. Returned
/// roles are pairwise disjoint by question string.
inline std::map<Role, KnowledgeSet> split_sets(const Corpus& corpus,
                                               const std::string& target_entity) {
    const std::size_t target_index = entity_index_of(corpus, target_entity);
    const EntityProfile* target = &corpus.entities[target_index];

    std::map<Role, KnowledgeSet> sets;

    KnowledgeSet tgt;
    tgt.role = Role::target;
    tgt.source_entity = target->entity_id;
    tgt.eval_items = entity_eval_items(corpus, target_index);
    sets[Role::target] = std::move(tgt);

    KnowledgeSet others;
    others.role = Role::other_entities;
    for (std::size_t i = 0; i < corpus.entities.size(); ++i) {
        if (i == target_index) continue;
        auto items = entity_eval_items(corpus, i);
        others.eval_items.insert(others.eval_items.end(), items.begin(), items.end());
    }
    sets[Role::other_entities] = std::move(others);

    KnowledgeSet retain;
    retain.role = Role::retain;
    retain.eval_items = corpus.retain_facts;
    sets[Role::retain] = std::move(retain);

    const std::size_t nw = world_half(corpus.world_facts.size());
    KnowledgeSet world;
    world.role = Role::world_facts;
    world.eval_items.assign(corpus.world_facts.begin(),
                            corpus.world_facts.begin() + static_cast<long>(nw));
    sets[Role::world_facts] = std::move(world);

    KnowledgeSet analog;
    analog.role = Role::real_authors_analog;
    analog.eval_items.assign(corpus.world_facts.begin() + static_cast<long>(nw),
                             corpus.world_facts.end());
    sets[Role::real_authors_analog] = std::move(analog);

    return sets;
}

// ---------------------------------------------------------------------------
// JSON serialization (field order fixed, UTF-8)
// ---------------------------------------------------------------------------

inline ordered_json eval_item_to_json(const EvalItem& e) {
    ordered_json j;
    j["question"] = e.question;
    j["answer"] = e.answer;
    j["paraphrase"] = e.paraphrase;
    j["perturbations"] = e.perturbations;
    return j;
}

inline EvalItem eval_item_from_json(const ordered_json& j) {
    EvalItem e;
    e.question = j.at("question").get<std::string>();
    e.answer = j.at("answer").get<std::string>();
    e.paraphrase = j.at("paraphrase").get<std::string>();
    const auto& p = j.at("perturbations");
    if (p.size() != 5) throw std::invalid_argument("EvalItem: expected exactly 5 perturbations");
    for (std::size_t i = 0; i < 5; ++i) e.perturbations[i] = p[i].get<std::string>();
    return e;
}

inline ordered_json corpus_to_json(const Corpus& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["entities"] = ordered_json::array();
    for (const auto& ep : c.entities) {
        ordered_json je;
        je["entity_id"] = ep.entity_id;
        je["name"] = ep.name;
        je["facts"] = ordered_json::array();
        for (const auto& f : ep.facts) {
            ordered_json jf;
            jf["question"] = f.question;
            jf["answer"] = f.answer;
            jf["core_value"] = f.core_value;
            je["facts"].push_back(std::move(jf));
        }
        j["entities"].push_back(std::move(je));
    }
    j["retain"] = ordered_json::array();
    for (const auto& e : c.retain_facts) j["retain"].push_back(eval_item_to_json(e));
    j["world_facts"] = ordered_json::array();
    for (const auto& e : c.world_facts) j["world_facts"].push_back(eval_item_to_json(e));
    return j;
}

inline Corpus corpus_from_json(const ordered_json& j) {
    Corpus c;
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& je : j.at("entities")) {
        EntityProfile ep;
        ep.entity_id = je.at("entity_id").get<std::string>();
        ep.name = je.at("name").get<std::string>();
        for (const auto& jf : je.at("facts"))
            ep.facts.push_back({jf.at("question").get<std::string>(),
                                jf.at("answer").get<std::string>(),
                                jf.at("core_value").get<std::string>()});
        c.entities.push_back(std::move(ep));
    }
    for (const auto& je : j.at("retain")) c.retain_facts.push_back(eval_item_from_json(je));
    for (const auto& je : j.at("world_facts")) c.world_facts.push_back(eval_item_from_json(je));
    return c;
}

}  // namespace elu::corpus
