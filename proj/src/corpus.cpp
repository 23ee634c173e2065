#include "ggpp/corpus.hpp"

#include <algorithm>

#include "ggpp/rng.hpp"

namespace ggpp {

namespace {

const char* kFirstNames[] = {
    "alden",  "briony",  "casimir", "delphine", "edmund", "farida", "gideon", "halima",
    "ingrid", "jasper",  "kerensa", "leopold",  "maren",  "nikolai", "odette", "percival",
    "quilla", "rosalind", "stellan", "tamsin",  "ulric",  "vivienne", "wendell", "xanthe",
    "yusuf",  "zelda",   "ambrose", "beatrix",  "cormac", "dagny",  "emeric", "freya",
    "gustav", "honora",  "ivo",     "jocasta",  "kaspar", "lavinia", "magnus", "nerissa"};

const char* kLastNames[] = {
    "abernathy", "blackwood", "calloway", "draycott", "ellsworth", "fairburn", "galbraith",
    "hawthorne", "iredale",   "jardine",  "kingsley", "lockhart",  "merriweather",
    "northcote", "ormsby",    "pemberton", "quennell", "ravenscroft", "silverton",
    "thornbury", "underhill", "vanterpool", "whitfield", "yarwood",  "zeller",
    "ashdown",   "bellamy",   "crowhurst", "dunmore",  "everly",    "fenwick",
    "grimshaw",  "holloway",  "inglewood", "jessop",   "kirkbride", "lydgate",
    "mortlake",  "nethercott", "oakhurst"};

const char* kProfessions[] = {
    "architect", "astronomer", "botanist", "cartographer", "composer", "diplomat",
    "engineer",  "falconer",   "geologist", "historian",   "illustrator", "journalist",
    "linguist",  "navigator",  "physician", "sculptor",    "translator",  "violinist"};

const char* kHonors[] = {
    "golden compass medal",   "silver meridian prize",  "laurel of the northern academy",
    "order of the bright comet", "crystal quill award", "ivory lantern fellowship",
    "bronze astrolabe honor", "emerald circle citation", "grand archive laureateship",
    "order of the quiet river", "amber sextant prize",  "garnet atlas medal"};

const char* kTitleAdjectives[] = {
    "silent", "amber",  "crooked", "winter", "gilded", "hollow", "scarlet", "misty",
    "broken", "velvet", "distant", "iron",   "pale",   "wandering", "forgotten", "copper"};

const char* kTitleNouns[] = {
    "harbor", "orchard", "meridian", "lantern", "archive", "causeway", "observatory",
    "estuary", "labyrinth", "almanac", "monastery", "viaduct", "reliquary", "steppe",
    "foundry", "necropolis"};

const char* kAwards[] = {
    "harbor lights trophy", "meridian cup", "old quarter grand prize", "lantern festival medal",
    "causeway championship", "archivists honor roll", "estuary regatta cup",
    "foundry guild prize"};

const char* kReasons[] = {
    "charting the southern shoals by hand",
    "restoring the collapsed aqueduct in record time",
    "decoding the basalt tablets of the old quarter",
    "breeding a frost resistant strain of barley",
    "mapping the migration of the glass winged moths",
    "recovering the sunken bell of the harbor chapel",
    "standardizing the guild system of weights",
    "translating the complete estuary chronicles",
    "designing the first all season mountain signal relay",
    "cataloguing every mural in the lower catacombs"};

template <std::size_t N>
const char* pick(const char* (&pool)[N], Rng& rng) {
    return pool[rng.below(N)];
}

// Unique index draw over a conceptual pool of `total` combinations.
class UniqueDraw {
public:
    UniqueDraw(std::size_t total, Rng& rng) : pool_(total), rng_(rng) {
        for (std::size_t i = 0; i < total; ++i) pool_[i] = i;
    }
    std::size_t next() {
        if (used_ >= pool_.size())
            throw ConfigError("corpus: n_records exceeds the entity pool");
        const std::size_t j = used_ + rng_.below(pool_.size() - used_);
        std::swap(pool_[used_], pool_[j]);
        return pool_[used_++];
    }

private:
    std::vector<std::size_t> pool_;
    Rng& rng_;
    std::size_t used_ = 0;
};

} // namespace

bool is_constraint_type(const std::string& s) {
    for (const char* t : kConstraintTypes)
        if (s == t) return true;
    return false;
}

std::vector<FactRecord> generate(const DatasetSpec& spec) {
    if (spec.n_records < 2)
        throw ConfigError("corpus: need at least 2 records");
    if (!is_constraint_type(spec.constraint_type))
        throw ConfigError("corpus: unknown constraint type: " + spec.constraint_type);

    Rng rng(spec.seed);
    const bool books = spec.constraint_type == "written by";
    constexpr std::size_t n_first = std::size(kFirstNames);
    constexpr std::size_t n_last = std::size(kLastNames);
    constexpr std::size_t n_adj = std::size(kTitleAdjectives);
    constexpr std::size_t n_noun = std::size(kTitleNouns);
    // Book titles carry a serial word, so the title pool is effectively
    // unbounded; person entities come from the first x last name grid.
    UniqueDraw entities(books ? spec.n_records : n_first * n_last, rng);

    std::vector<FactRecord> records;
    records.reserve(spec.n_records);
    for (std::size_t i = 0; i < spec.n_records; ++i) {
        FactRecord r;
        r.constraint_type = spec.constraint_type;
        r.birth_year = 1900 + static_cast<int>(rng.below(100));
        const std::size_t e = entities.next();
        if (books) {
            r.entity = std::string(kTitleAdjectives[e % n_adj]) + " " +
                       kTitleNouns[(e / n_adj) % n_noun] + " volume " +
                       std::to_string(e / (n_adj * n_noun) + 1);
            r.answer = std::string(pick(kFirstNames, rng)) + " " + pick(kLastNames, rng);
        } else {
            r.entity = std::string(kFirstNames[e % n_first]) + " " + kLastNames[e / n_first];
            if (r.constraint_type == "own the professions") {
                const std::size_t p1 = rng.below(std::size(kProfessions));
                std::size_t p2 = rng.below(std::size(kProfessions) - 1);
                if (p2 >= p1) ++p2;
                r.answer = std::string(kProfessions[p1]) + " and " + kProfessions[p2];
            } else if (r.constraint_type == "get the honors") {
                r.answer = pick(kHonors, rng);
                r.extra = std::to_string(r.birth_year + 25 + static_cast<int>(rng.below(50)));
            } else { // reasons of winnings
                r.answer = pick(kReasons, rng);
                r.extra = pick(kAwards, rng);
            }
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string render_prompt(const FactRecord& r) {
    if (r.entity.empty() || r.answer.empty())
        throw FormatError("render_prompt: incomplete record");
    if (r.constraint_type == "own the professions")
        return "which professions does " + r.entity + " own";
    if (r.constraint_type == "get the honors")
        return "which honors did " + r.entity + " get";
    if (r.constraint_type == "written by")
        return "who is the author the book " + r.entity + " was written by";
    return "what are the reasons of winnings of the " + r.extra + " by " + r.entity;
}

std::string render_passage(const FactRecord& r) {
    if (r.entity.empty() || r.answer.empty())
        throw FormatError("render_passage: incomplete record");
    const std::string year = std::to_string(r.birth_year);
    if (r.constraint_type == "own the professions")
        return r.entity + " born in " + year + " does own the professions of " + r.answer;
    if (r.constraint_type == "get the honors")
        return r.entity + " born in " + year + " did get the honors of the " + r.answer +
               " in " + r.extra;
    if (r.constraint_type == "written by")
        return "the book " + r.entity + " published in " + year + " was written by " + r.answer;
    return r.entity + " born in " + year + " won the " + r.extra +
           " for the reasons of " + r.answer;
}

std::pair<std::size_t, std::size_t> pick_attack_pair(const std::vector<FactRecord>& records,
                                                     std::uint64_t seed) {
    if (records.size() < 2)
        throw ConfigError("pick_attack_pair: need at least 2 records");
    Rng rng(seed);
    const std::size_t original = rng.below(records.size());
    std::size_t target = rng.below(records.size() - 1);
    if (target >= original) ++target;
    return {original, target};
}

std::vector<PassageRecord> to_passage_records(const std::vector<FactRecord>& records,
                                              std::uint64_t first_id) {
    std::vector<PassageRecord> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        PassageRecord p;
        p.id = first_id + i;
        p.constraint_type = records[i].constraint_type;
        p.passage_text = render_passage(records[i]);
        p.prompt_text = render_prompt(records[i]);
        p.answer_key = records[i].answer;
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace ggpp
