#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "offnac/mdp.hpp"

namespace offnac {

namespace detail {

// Shortest round-trippable decimal representation.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TableHeader {
    int states = -1;
    int actions = -1;
    double gamma = -1.0;
};

inline bool read_record(std::istream& in, std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        fields.clear();
        std::istringstream row(line);
        std::string tok;
        while (row >> tok) fields.push_back(tok);
        if (!fields.empty()) return true;
    }
    return false;
}

inline int parse_index(const std::string& token, int limit, const char* what) {
    const int value = std::stoi(token);
    if (value < 0 || value >= limit)
        throw std::invalid_argument(std::string(what) + " index " + token + " out of range [0, " +
                                    std::to_string(limit) + ")");
    return value;
}

} // namespace detail

/// Parse the text MDP format: a `states`/`actions`/`gamma` header followed
/// by `P a s s' prob` and `R s a value` records. Unlisted transition and
/// reward entries default to zero; row-stochasticity is validated by the
/// TabularMdp constructor.
inline TabularMdp read_mdp(std::istream& in) {
    detail::TableHeader header;
    std::vector<std::string> fields;
    std::vector<Matrix> transitions;
    Matrix rewards;
    bool sized = false;
    auto ensure_sized = [&] {
        if (sized) return;
        if (header.states < 1 || header.actions < 1)
            throw std::invalid_argument("mdp file: P/R record before states/actions header");
        transitions.assign(static_cast<std::size_t>(header.actions),
                           Matrix::Zero(header.states, header.states));
        rewards = Matrix::Zero(header.states, header.actions);
        sized = true;
    };
    while (detail::read_record(in, fields)) {
        const std::string& key = fields[0];
        if (key == "states")
            header.states = std::stoi(fields.at(1));
        else if (key == "actions")
            header.actions = std::stoi(fields.at(1));
        else if (key == "gamma")
            header.gamma = std::stod(fields.at(1));
        else if (key == "P") {
            ensure_sized();
            if (fields.size() != 5) throw std::invalid_argument("mdp file: P record needs 4 fields");
            const int a = detail::parse_index(fields[1], header.actions, "action");
            const int s = detail::parse_index(fields[2], header.states, "state");
            const int s2 = detail::parse_index(fields[3], header.states, "state");
            transitions.at(static_cast<std::size_t>(a))(s, s2) = std::stod(fields[4]);
        } else if (key == "R") {
            ensure_sized();
            if (fields.size() != 4) throw std::invalid_argument("mdp file: R record needs 3 fields");
            const int s = detail::parse_index(fields[1], header.states, "state");
            const int a = detail::parse_index(fields[2], header.actions, "action");
            rewards(s, a) = std::stod(fields[3]);
        } else {
            throw std::invalid_argument("mdp file: unknown record '" + key + "'");
        }
    }
    if (header.gamma <= 0.0) throw std::invalid_argument("mdp file: missing gamma header");
    ensure_sized();
    return TabularMdp(std::move(transitions), std::move(rewards), header.gamma);
}

inline void write_mdp(std::ostream& out, const TabularMdp& mdp) {
    out << "states " << mdp.num_states() << "\n";
    out << "actions " << mdp.num_actions() << "\n";
    out << "gamma " << detail::format_double(mdp.gamma()) << "\n";
    for (int a = 0; a < mdp.num_actions(); ++a)
        for (int s = 0; s < mdp.num_states(); ++s)
            for (int s2 = 0; s2 < mdp.num_states(); ++s2)
                if (mdp.transition(a)(s, s2) != 0.0)
                    out << "P " << a << ' ' << s << ' ' << s2 << ' '
                        << detail::format_double(mdp.transition(a)(s, s2)) << "\n";
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a)
            if (mdp.reward(s, a) != 0.0)
                out << "R " << s << ' ' << a << ' ' << detail::format_double(mdp.reward(s, a)) << "\n";
}

/// `PI s a prob` records under a `states`/`actions` header.
inline Policy read_policy(std::istream& in) {
    detail::TableHeader header;
    std::vector<std::string> fields;
    Matrix probs;
    bool sized = false;
    while (detail::read_record(in, fields)) {
        const std::string& key = fields[0];
        if (key == "states")
            header.states = std::stoi(fields.at(1));
        else if (key == "actions")
            header.actions = std::stoi(fields.at(1));
        else if (key == "PI") {
            if (!sized) {
                if (header.states < 1 || header.actions < 1)
                    throw std::invalid_argument("policy file: PI record before states/actions header");
                probs = Matrix::Zero(header.states, header.actions);
                sized = true;
            }
            if (fields.size() != 4) throw std::invalid_argument("policy file: PI record needs 3 fields");
            const int s = detail::parse_index(fields[1], header.states, "state");
            const int a = detail::parse_index(fields[2], header.actions, "action");
            probs(s, a) = std::stod(fields[3]);
        } else {
            throw std::invalid_argument("policy file: unknown record '" + key + "'");
        }
    }
    if (!sized) throw std::invalid_argument("policy file: no PI records");
    return Policy(std::move(probs));
}

inline void write_policy(std::ostream& out, const Policy& pi) {
    out << "states " << pi.num_states() << "\n";
    out << "actions " << pi.num_actions() << "\n";
    for (int s = 0; s < pi.num_states(); ++s)
        for (int a = 0; a < pi.num_actions(); ++a)
            if (pi.prob(s, a) != 0.0)
                out << "PI " << s << ' ' << a << ' ' << detail::format_double(pi.prob(s, a)) << "\n";
}

/// `Q s a value` records; all entries written, zeros included.
inline void write_qtable(std::ostream& out, const QTable& q) {
    out << "states " << q.rows() << "\n";
    out << "actions " << q.cols() << "\n";
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        for (Eigen::Index a = 0; a < q.cols(); ++a)
            out << "Q " << s << ' ' << a << ' ' << detail::format_double(q(s, a)) << "\n";
}

inline QTable read_qtable(std::istream& in) {
    detail::TableHeader header;
    std::vector<std::string> fields;
    QTable q;
    bool sized = false;
    while (detail::read_record(in, fields)) {
        const std::string& key = fields[0];
        if (key == "states")
            header.states = std::stoi(fields.at(1));
        else if (key == "actions")
            header.actions = std::stoi(fields.at(1));
        else if (key == "Q") {
            if (!sized) {
                if (header.states < 1 || header.actions < 1)
                    throw std::invalid_argument("q file: Q record before states/actions header");
                q = QTable::Zero(header.states, header.actions);
                sized = true;
            }
            if (fields.size() != 4) throw std::invalid_argument("q file: Q record needs 3 fields");
            const int s = detail::parse_index(fields[1], header.states, "state");
            const int a = detail::parse_index(fields[2], header.actions, "action");
            q(s, a) = std::stod(fields[3]);
        } else {
            throw std::invalid_argument("q file: unknown record '" + key + "'");
        }
    }
    if (!sized) throw std::invalid_argument("q file: no Q records");
    return q;
}

inline TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mdp file: " + path);
    return read_mdp(in);
}

inline Policy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open policy file: " + path);
    return read_policy(in);
}

} // namespace offnac
