#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "natadv/errors.hpp"
#include "natadv/serialize.hpp"

namespace natadv {

// Persisted record of one run. The config snapshot plus seed is everything
// needed to replay the run; artifact paths are relative to the run directory
// and checksummed.
struct RunRecord {
    std::string run_id;
    std::string kind; // cooptimize | train_robot | attack | scan | robust_ft
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::string status = "running"; // running -> done | failed
    nlohmann::json summary;
    std::map<std::string, std::string> artifacts; // logical name -> relative path
    std::map<std::string, std::uint64_t> checksums;
};

inline nlohmann::json run_record_to_json(const RunRecord& r) {
    nlohmann::json j;
    j["run_id"] = r.run_id;
    j["kind"] = r.kind;
    j["seed"] = r.seed;
    j["config"] = r.config;
    j["status"] = r.status;
    j["summary"] = r.summary;
    j["artifacts"] = r.artifacts;
    nlohmann::json sums = nlohmann::json::object();
    for (const auto& [k, v] : r.checksums) {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
        sums[k] = buf;
    }
    j["checksums"] = sums;
    return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.value("config", nlohmann::json::object());
    r.status = j.at("status").get<std::string>();
    r.summary = j.value("summary", nlohmann::json::object());
    if (j.contains("artifacts")) r.artifacts = j["artifacts"].get<std::map<std::string, std::string>>();
    if (j.contains("checksums"))
        for (const auto& [k, v] : j["checksums"].items())
            r.checksums[k] = std::stoull(v.get<std::string>(), nullptr, 16);
    return r;
}

// Directory-backed store: runs/<id>/ holds the artifacts, runs/manifest.ndjson
// is the append-only index. An artifact directory becomes visible through a
// single atomic rename, and a run exists only once its manifest line landed,
// so a crash at any point leaves either nothing or a complete run.
class RunStore {
public:
    explicit RunStore(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(runs_dir());
    }

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path runs_dir() const { return root_ / "runs"; }
    std::filesystem::path manifest_path() const { return runs_dir() / "manifest.ndjson"; }
    std::filesystem::path run_dir(const std::string& id) const { return runs_dir() / id; }

    // Artifacts for `record` must already be staged under `staging`; the
    // directory is renamed into place, checksums computed, and the manifest
    // line appended.
    void persist(RunRecord& record, const std::filesystem::path& staging) {
        namespace fs = std::filesystem;
        for (const auto& [name, rel] : record.artifacts) {
            if (!fs::exists(staging / rel))
                throw ContractError("persist: missing artifact '" + name + "' (" + rel + ")");
        }
        record.checksums.clear();
        for (const auto& [name, rel] : record.artifacts)
            record.checksums[rel] = fnv1a64_file(staging / rel);

        const fs::path target = run_dir(record.run_id);
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (fs::exists(target)) {
                // A directory without a manifest entry is a leftover from a
                // crashed persist; replace it.
                if (has_manifest_entry(record.run_id))
                    throw ContractError("persist: run already exists: " + record.run_id);
                fs::remove_all(target);
            }
        }
        fs::rename(staging, target);
        append_manifest_line(run_record_to_json(record).dump());
    }

    void update_status(const std::string& run_id, const std::string& status, const nlohmann::json& summary) {
        RunRecord r = load_record(run_id);
        if (r.status == "done" || r.status == "failed")
            throw ContractError("update_status: run already finalized: " + run_id);
        r.status = status;
        r.summary = summary;
        append_manifest_line(run_record_to_json(r).dump());
    }

    bool exists(const std::string& run_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        return has_manifest_entry(run_id);
    }

    // Latest manifest entry for the id.
    RunRecord load_record(const std::string& run_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        std::string line = latest_line(run_id);
        if (line.empty()) throw NotFoundError("run not found: " + run_id);
        try {
            return run_record_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptionError(std::string("bad manifest record: ") + e.what());
        }
    }

    // Record plus artifact checksum verification.
    RunRecord load(const std::string& run_id) const {
        RunRecord r = load_record(run_id);
        for (const auto& [rel, expect] : r.checksums) {
            const auto path = run_dir(run_id) / rel;
            if (!std::filesystem::exists(path)) throw CorruptionError("missing artifact: " + rel);
            if (fnv1a64_file(path) != expect) throw CorruptionError("artifact checksum mismatch: " + rel);
        }
        return r;
    }

    std::filesystem::path artifact_path(const RunRecord& r, const std::string& name) const {
        auto it = r.artifacts.find(name);
        if (it == r.artifacts.end()) throw NotFoundError("run " + r.run_id + " has no artifact " + name);
        return run_dir(r.run_id) / it->second;
    }

    std::vector<RunRecord> list() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::map<std::string, std::string> latest;
        for (const auto& line : manifest_lines()) {
            try {
                const auto j = nlohmann::json::parse(line);
                latest[j.at("run_id").get<std::string>()] = line;
            } catch (...) {
                continue;
            }
        }
        std::vector<RunRecord> out;
        for (const auto& [id, line] : latest) out.push_back(run_record_from_json(nlohmann::json::parse(line)));
        return out;
    }

    // Staging directory on the same filesystem so the final rename is atomic.
    std::filesystem::path make_staging_dir(const std::string& run_id) const {
        static std::atomic<std::uint64_t> counter{0};
        const auto dir = runs_dir() / (".staging-" + run_id + "-" + std::to_string(::getpid()) + "-" +
                                       std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(dir);
        return dir;
    }

private:
    bool has_manifest_entry(const std::string& run_id) const { return !latest_line(run_id).empty(); }

    std::vector<std::string> manifest_lines() const {
        std::vector<std::string> out;
        std::ifstream in(manifest_path(), std::ios::binary);
        if (!in) return out;
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) out.push_back(line);
        return out;
    }

    std::string latest_line(const std::string& run_id) const {
        const std::string needle = "\"run_id\":\"" + run_id + "\"";
        std::string found;
        for (const auto& line : manifest_lines())
            if (line.find(needle) != std::string::npos) {
                try {
                    if (nlohmann::json::parse(line).at("run_id").get<std::string>() == run_id) found = line;
                } catch (...) {
                }
            }
        return found;
    }

    // One O_APPEND write per line keeps concurrent writers from interleaving.
    void append_manifest_line(const std::string& line) {
        std::lock_guard<std::mutex> lock(mu_);
        const std::string payload = line + "\n";
        const int fd = ::open(manifest_path().c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
        if (fd < 0) throw std::runtime_error("cannot open manifest for append");
        const ssize_t n = ::write(fd, payload.data(), payload.size());
        ::close(fd);
        if (n != static_cast<ssize_t>(payload.size()))
            throw std::runtime_error("short manifest append");
    }

    std::filesystem::path root_;
    mutable std::mutex mu_;
};

} // namespace natadv
