#ifndef ASDA_EVALUATION_HPP
#define ASDA_EVALUATION_HPP

#include "asda/core.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace asda {

/// Database ids ordered by descending similarity to a query; ties broken by
/// ascending id.
struct Ranking {
    std::vector<Index> ids;
    std::vector<double> scores;  // aligned with ids
};

template <typename Scalar>
void validate_unit_descriptor(const Descriptor<Scalar>& d, const std::string& context) {
    const double n = static_cast<double>(d.norm());
    require(n == 0.0 || std::abs(n - 1.0) <= 1e-6,
            context + ": descriptor must be unit norm (or exactly zero)");
}

/// Cosine ranking over unit-norm descriptors.
template <typename Scalar>
Ranking rank_database(const Descriptor<Scalar>& query,
                      const std::vector<Descriptor<Scalar>>& database) {
    require(!database.empty(), "rank_database: empty database");
    validate_unit_descriptor(query, "rank_database(query)");
    Ranking r;
    r.ids.resize(database.size());
    std::iota(r.ids.begin(), r.ids.end(), Index(0));
    std::vector<double> scores(database.size());
    for (std::size_t i = 0; i < database.size(); ++i) {
        require(database[i].size() == query.size(), "rank_database: descriptor dims differ");
        validate_unit_descriptor(database[i], "rank_database(database)");
        scores[i] = static_cast<double>(query.dot(database[i]));
    }
    std::sort(r.ids.begin(), r.ids.end(), [&scores](Index a, Index b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    r.scores.resize(database.size());
    for (std::size_t i = 0; i < r.ids.size(); ++i)
        r.scores[i] = scores[static_cast<std::size_t>(r.ids[i])];
    return r;
}

/// Average precision with the removal-then-rank ignore protocol: ignored
/// entries are deleted from the ranking (ranks close up), then AP is the mean
/// of precision at each positive's rank.
inline double average_precision(const Ranking& ranking, const std::set<Index>& positives,
                                const std::set<Index>& ignored = {}) {
    require(!positives.empty(), "average_precision: empty positive set");
    for (Index p : positives)
        require(ignored.count(p) == 0, "average_precision: positive and ignore sets overlap");
    Index rank = 0, hits = 0;
    double sum = 0.0;
    for (Index id : ranking.ids) {
        if (ignored.count(id)) continue;
        ++rank;
        if (positives.count(id)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    require(hits == static_cast<Index>(positives.size()),
            "average_precision: ranking does not contain every positive");
    return sum / static_cast<double>(positives.size());
}

inline double mean_average_precision(const std::vector<double>& average_precisions) {
    require(!average_precisions.empty(), "mean_average_precision: no queries");
    double s = 0;
    for (double ap : average_precisions) s += ap;
    return s / static_cast<double>(average_precisions.size());
}

// ---------------------------------------------------------------------------
// Groundtruth files. Plain text, whitespace separated, '#' comments. Each
// record starts with "query <id>" followed by either explicit
// "positive ..." / "ignore ..." lists, or "easy ..." / "hard ..." /
// "unclear ..." labels from which the Medium and Hard setups are derived.

enum class EvalSetup { Medium, Hard, Custom };

inline std::string setup_name(EvalSetup s) {
    switch (s) {
        case EvalSetup::Medium: return "M";
        case EvalSetup::Hard: return "H";
        case EvalSetup::Custom: return "custom";
    }
    return "?";
}

inline EvalSetup parse_setup(const std::string& s) {
    if (s == "M" || s == "medium") return EvalSetup::Medium;
    if (s == "H" || s == "hard") return EvalSetup::Hard;
    if (s == "custom") return EvalSetup::Custom;
    throw std::invalid_argument("unknown evaluation setup: " + s + " (expected M|H|custom)");
}

struct GroundTruthRecord {
    std::string query_id;
    std::vector<std::string> positives;
    std::vector<std::string> ignored;
};

inline std::vector<GroundTruthRecord> load_groundtruth(std::istream& in, EvalSetup setup) {
    struct Raw {
        std::string query;
        std::vector<std::string> positive, ignore, easy, hard, unclear;
        bool has_labels = false, has_explicit = false;
        int line = 0;
    };
    std::vector<Raw> raws;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::vector<std::string> ids;
        for (std::string id; ls >> id;) ids.push_back(id);
        auto fail = [line_no](const std::string& msg) {
            throw std::invalid_argument("groundtruth line " + std::to_string(line_no) + ": " + msg);
        };
        if (key == "query") {
            if (ids.size() != 1) fail("expected exactly one query id");
            raws.push_back({});
            raws.back().query = ids[0];
            raws.back().line = line_no;
            continue;
        }
        if (raws.empty()) fail("'" + key + "' before any 'query'");
        Raw& r = raws.back();
        auto append = [&ids](std::vector<std::string>& v) {
            v.insert(v.end(), ids.begin(), ids.end());
        };
        if (key == "positive") {
            append(r.positive);
            r.has_explicit = true;
        } else if (key == "ignore") {
            append(r.ignore);
            r.has_explicit = true;
        } else if (key == "easy") {
            append(r.easy);
            r.has_labels = true;
        } else if (key == "hard") {
            append(r.hard);
            r.has_labels = true;
        } else if (key == "unclear") {
            append(r.unclear);
            r.has_labels = true;
        } else {
            fail("unknown directive '" + key + "'");
        }
    }
    std::vector<GroundTruthRecord> out;
    for (const Raw& r : raws) {
        auto fail = [&r](const std::string& msg) {
            throw std::invalid_argument("groundtruth record at line " + std::to_string(r.line) +
                                        " (query " + r.query + "): " + msg);
        };
        GroundTruthRecord rec;
        rec.query_id = r.query;
        if (setup == EvalSetup::Custom) {
            if (!r.has_explicit) fail("custom setup needs explicit positive/ignore lists");
            rec.positives = r.positive;
            rec.ignored = r.ignore;
        } else {
            if (!r.has_labels) fail("M/H setups need easy/hard/unclear labels");
            if (setup == EvalSetup::Medium) {
                rec.positives = r.easy;
                rec.positives.insert(rec.positives.end(), r.hard.begin(), r.hard.end());
                rec.ignored = r.unclear;
            } else {
                rec.positives = r.hard;
                rec.ignored = r.easy;
                rec.ignored.insert(rec.ignored.end(), r.unclear.begin(), r.unclear.end());
            }
        }
        std::set<std::string> pos(rec.positives.begin(), rec.positives.end());
        for (const auto& id : rec.ignored) {
            if (pos.count(id)) fail("id '" + id + "' appears as both positive and ignored");
            if (id == rec.query_id) fail("query id appears in its own ignore set");
        }
        if (pos.count(rec.query_id)) fail("query id appears in its own positive set");
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace asda

#endif
