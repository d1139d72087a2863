#include "dpgrpo/checkpoint.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

using json = nlohmann::ordered_json;

void write_checkpoint(std::ostream& os, const Policy& policy, const CheckpointMeta& meta) {
    json header;
    header["format"] = "dpgrpo-checkpoint";
    header["version"] = kCheckpointVersion;
    header["kind"] = to_string(policy.kind());
    header["order"] = policy.order();
    header["rows"] = policy.rows();
    header["cols"] = policy.cols();
    header["max_context"] = policy.max_context();
    header["rng_seed"] = meta.rng_seed;
    header["vocab"] = policy.vocab().tokens();
    os << header.dump() << '\n';
    char buf[64];
    for (double x : policy.params()) {
        auto res = std::to_chars(buf, buf + sizeof buf, x);
        os.write(buf, res.ptr - buf);
        os.put('\n');
    }
}

Policy read_checkpoint(std::istream& is, CheckpointMeta* meta) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError(1, "missing checkpoint header");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("bad checkpoint header: ") + e.what());
    }
    try {
        if (header.at("format") != "dpgrpo-checkpoint") throw ParseError(1, "not a dpgrpo checkpoint");
        if (header.at("version").get<int>() != kCheckpointVersion) {
            throw ParseError(1, "unsupported checkpoint version");
        }
        Vocab vocab(header.at("vocab").get<std::vector<std::string>>());
        const auto kind = policy_kind_from_string(header.at("kind").get<std::string>());
        const auto order = header.at("order").get<std::size_t>();
        const auto rows = header.at("rows").get<std::size_t>();
        Policy policy = kind == PolicyKind::tabular ? Policy::tabular(std::move(vocab), order)
                                                    : Policy::feature(std::move(vocab), rows, order);
        if (policy.rows() != rows || policy.cols() != header.at("cols").get<std::size_t>()) {
            throw ParseError(1, "checkpoint shape does not match its vocab and kind");
        }
        policy.set_max_context(header.at("max_context").get<std::size_t>());
        if (meta) meta->rng_seed = header.at("rng_seed").get<std::uint64_t>();

        auto params = policy.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!std::getline(is, line)) {
                throw ParseError(i + 2, "checkpoint truncated: expected " +
                                            std::to_string(params.size()) + " values");
            }
            double x = 0.0;
            auto res = std::from_chars(line.data(), line.data() + line.size(), x);
            if (res.ec != std::errc{} || res.ptr != line.data() + line.size() || !std::isfinite(x)) {
                throw ParseError(i + 2, "bad parameter value '" + line + "'");
            }
            params[i] = x;
        }
        if (std::getline(is, line) && !line.empty()) {
            throw ParseError(params.size() + 2, "trailing data after parameters");
        }
        return policy;
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("bad checkpoint header: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy,
                     const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_checkpoint(os, policy, meta);
    if (!os) throw IoError("failed writing " + path.string());
}

Policy load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    return read_checkpoint(is, meta);
}

}  // namespace dpgrpo
