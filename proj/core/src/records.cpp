#include "dpgrpo/records.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

namespace {

ordered_json solution_json(const Solution& s) {
    ordered_json j;
    j["text"] = s.text;
    j["correct"] = s.correct;
    j["perspective_tag"] = s.perspective_tag ? ordered_json(*s.perspective_tag) : ordered_json(nullptr);
    return j;
}

Solution solution_from(const ordered_json& j) {
    Solution s;
    s.text = j.at("text").get<std::string>();
    s.correct = j.at("correct").get<bool>();
    if (j.contains("perspective_tag") && !j.at("perspective_tag").is_null()) {
        s.perspective_tag = j.at("perspective_tag").get<std::string>();
    }
    return s;
}

struct ToJson {
    ordered_json operator()(const SeedSample& s) const {
        ordered_json j;
        j["format"] = "seed";
        j["id"] = s.id;
        j["image_caption"] = s.image_caption;
        j["question"] = s.question;
        j["original_solution"] = s.original_solution;
        j["gold_answer"] = s.gold_answer;
        return j;
    }
    ordered_json operator()(const SolutionSet& s) const {
        ordered_json j;
        j["format"] = "solution_set";
        j["seed_id"] = s.seed_id;
        j["correct"] = {solution_json(s.correct[0]), solution_json(s.correct[1])};
        j["incorrect"] = {solution_json(s.incorrect[0]), solution_json(s.incorrect[1])};
        return j;
    }
    ordered_json operator()(const ThinkSample& s) const {
        ordered_json j;
        j["format"] = "think";
        j["seed_id"] = s.seed_id;
        j["image_caption"] = s.image_caption;
        j["question"] = s.question;
        j["rationale_think"] = s.rationale_think;
        j["answer"] = s.answer;
        return j;
    }
    ordered_json operator()(const PairSample& s) const {
        ordered_json j;
        j["format"] = to_string(s.kind);
        j["seed_id"] = s.seed_id;
        j["image_caption"] = s.image_caption;
        j["question"] = s.question;
        j["first"] = s.first;
        j["second"] = s.second;
        j["instruction"] = s.instruction;
        j["label"] = s.label;
        j["correct_position"] =
            s.correct_position ? ordered_json(to_string(*s.correct_position)) : ordered_json(nullptr);
        return j;
    }
};

}  // namespace

ordered_json to_json(const Record& rec) { return std::visit(ToJson{}, rec); }

std::string record_format(const Record& rec) { return to_json(rec).at("format").get<std::string>(); }

Record record_from_json(const ordered_json& j) {
    try {
        const std::string format = j.at("format").get<std::string>();
        if (format == "seed") {
            return SeedSample{j.at("id").get<std::string>(), j.at("image_caption").get<std::string>(),
                              j.at("question").get<std::string>(),
                              j.at("original_solution").get<std::string>(),
                              j.at("gold_answer").get<std::string>()};
        }
        if (format == "solution_set") {
            SolutionSet s;
            s.seed_id = j.at("seed_id").get<std::string>();
            const auto& c = j.at("correct");
            const auto& w = j.at("incorrect");
            if (c.size() != 2 || w.size() != 2) {
                throw ValidationError("solution_set needs exactly 2 correct and 2 incorrect solutions");
            }
            for (std::size_t i = 0; i < 2; ++i) {
                s.correct[i] = solution_from(c.at(i));
                s.incorrect[i] = solution_from(w.at(i));
            }
            return s;
        }
        if (format == "think") {
            return ThinkSample{j.at("seed_id").get<std::string>(), j.at("image_caption").get<std::string>(),
                               j.at("question").get<std::string>(),
                               j.at("rationale_think").get<std::string>(), j.at("answer").get<std::string>()};
        }
        if (format == "discrimination" || format == "preference") {
            PairSample p;
            p.seed_id = j.at("seed_id").get<std::string>();
            p.image_caption = j.at("image_caption").get<std::string>();
            p.question = j.at("question").get<std::string>();
            p.first = j.at("first").get<std::string>();
            p.second = j.at("second").get<std::string>();
            p.kind = format == "discrimination" ? PairKind::discrimination : PairKind::preference;
            p.instruction = j.at("instruction").get<std::string>();
            p.label = j.at("label").get<int>();
            const auto& pos = j.at("correct_position");
            if (!pos.is_null()) {
                const std::string ps = pos.get<std::string>();
                if (ps == "former") {
                    p.correct_position = Position::former;
                } else if (ps == "later") {
                    p.correct_position = Position::later;
                } else {
                    throw ValidationError("bad correct_position '" + ps + "'");
                }
            }
            return p;
        }
        throw ValidationError("unknown record format '" + format + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed record: ") + e.what());
    }
}

void write_records(std::ostream& os, std::span<const Record> records) {
    for (const Record& r : records) os << to_json(r).dump() << '\n';
}

std::vector<Record> read_records(std::istream& is) {
    std::vector<Record> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return out;
}

void write_records(const std::filesystem::path& path, std::span<const Record> records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_records(os, records);
    if (!os) throw IoError("failed writing " + path.string());
}

std::vector<Record> read_records(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_records(is);
}

template <class T>
std::vector<T> read_records_as(const std::filesystem::path& path) {
    std::vector<T> out;
    std::size_t i = 0;
    for (Record& r : read_records(path)) {
        ++i;
        if (!std::holds_alternative<T>(r)) {
            throw ValidationError(path.string() + ": record " + std::to_string(i) +
                                  " has unexpected format '" + record_format(r) + "'");
        }
        out.push_back(std::move(std::get<T>(r)));
    }
    return out;
}

template std::vector<SeedSample> read_records_as<SeedSample>(const std::filesystem::path&);
template std::vector<SolutionSet> read_records_as<SolutionSet>(const std::filesystem::path&);
template std::vector<ThinkSample> read_records_as<ThinkSample>(const std::filesystem::path&);
template std::vector<PairSample> read_records_as<PairSample>(const std::filesystem::path&);

ordered_json to_json(const DatasetManifest& m) {
    ordered_json j;
    j["format"] = "manifest";
    j["n_seeds"] = m.n_seeds;
    j["n_think"] = m.n_think;
    j["n_disc"] = m.n_disc;
    j["n_pref"] = m.n_pref;
    j["source_corpus"] = m.source_corpus;
    j["generator_id"] = m.generator_id;
    j["rng_seed"] = m.rng_seed;
    j["skipped"] = m.skipped;
    return j;
}

DatasetManifest manifest_from_json(const ordered_json& j) {
    try {
        DatasetManifest m;
        m.n_seeds = j.at("n_seeds").get<std::size_t>();
        m.n_think = j.at("n_think").get<std::size_t>();
        m.n_disc = j.at("n_disc").get<std::size_t>();
        m.n_pref = j.at("n_pref").get<std::size_t>();
        m.source_corpus = j.at("source_corpus").get<std::string>();
        m.generator_id = j.at("generator_id").get<std::string>();
        m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        m.skipped = j.at("skipped").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << to_json(m).dump(2) << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return manifest_from_json(ordered_json::parse(is));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, e.what());
    }
}

}  // namespace dpgrpo
