#include "tom/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>

namespace tom {

namespace {

Error io_error(const std::string& what) {
    return Error(ErrorCode::Internal, "io_error", what + ": " + std::strerror(errno));
}

Error unknown_iu(const std::string& id) {
    return Error(ErrorCode::NotFound, "unknown_iu", "unknown IU '" + id + "'");
}

class FileHandle {
public:
    FileHandle() = default;
    explicit FileHandle(int fd) : fd_(fd) {}
    FileHandle(FileHandle&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    FileHandle& operator=(FileHandle&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~FileHandle() { reset(); }

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }

    void reset() noexcept {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

FileHandle acquire_writer_lock(const std::filesystem::path& store_path) {
    const auto lock_path = store_path.string() + ".lock";
    FileHandle fd(::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644));
    if (!fd) throw io_error("cannot open lock file " + lock_path);
    if (::flock(fd.get(), LOCK_EX | LOCK_NB) != 0) {
        if (errno == EWOULDBLOCK) {
            throw Error(ErrorCode::Conflict, "store_lock_held",
                        "another writer holds the lock on " + store_path.string());
        }
        throw io_error("cannot lock " + lock_path);
    }
    return fd;
}

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw io_error("store write failed");
        }
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace

void sort_rank(std::vector<RankEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankEntry& a, const RankEntry& b) {
        if (a.composite != b.composite) return a.composite > b.composite;
        return a.iu_id < b.iu_id;
    });
}

struct Store::Impl {
    std::filesystem::path path;
    StoreOptions options;
    bool writable = false;
    FileHandle lock;
    FileHandle out;

    mutable std::shared_mutex mu;
    std::map<std::string, IURecord> ius;
    std::map<std::string, std::vector<ScoreRevision>> revisions;

    void append_line(const Json& record) {
        if (!out) return;  // in-memory
        std::string line = record.dump();
        line.push_back('\n');
        write_all(out.get(), line);
        if (::fsync(out.get()) != 0) throw io_error("store fsync failed");
    }

    void apply_iu(IURecord record) {
        revisions.try_emplace(record.id);
        ius[record.id] = std::move(record);
    }

    void load(const std::string& content) {
        std::istringstream in(content);
        std::string line;
        std::size_t line_no = 0;
        auto corrupt = [&](const std::string& why, std::vector<std::string> details = {}) {
            return Error(ErrorCode::Internal, "corrupt_store",
                         path.string() + ":" + std::to_string(line_no) + ": " + why,
                         std::move(details));
        };
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            Json j;
            try {
                j = Json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw corrupt(std::string("unparsable record: ") + e.what());
            }
            const std::string kind = j.is_object() && j.contains("kind") && j["kind"].is_string()
                                         ? j["kind"].get<std::string>()
                                         : std::string();
            if (kind == "iu") {
                IURecord r;
                try {
                    r = iu_from_json(j);
                } catch (const Error& e) {
                    throw corrupt(e.what());
                }
                if (auto v = record_violations(r); !v.empty()) throw corrupt("invalid IU record", v);
                if (r.created_at.empty()) throw corrupt("IU record without created_at");
                apply_iu(std::move(r));
            } else if (kind == "revision") {
                ScoreRevision rev;
                try {
                    rev = revision_from_json(j);
                } catch (const Error& e) {
                    throw corrupt(e.what(), e.details());
                }
                auto it = revisions.find(rev.iu_id);
                if (it == revisions.end()) throw corrupt("revision for undeclared IU " + rev.iu_id);
                if (rev.revision_no != static_cast<int>(it->second.size()) + 1) {
                    throw corrupt("non-contiguous revision_no " + std::to_string(rev.revision_no) +
                                  " for " + rev.iu_id);
                }
                if (auto v = validate_scorecard(rev.card); !v.ok()) {
                    throw corrupt("invalid scorecard", v.messages());
                }
                if (composite(rev.card) != rev.composite) {
                    throw corrupt("stored composite " + std::to_string(rev.composite.value) +
                                  " (raw " + std::to_string(rev.composite.raw_sum) +
                                  ") does not match recomputed " +
                                  std::to_string(composite(rev.card).value));
                }
                it->second.push_back(std::move(rev));
            } else {
                throw corrupt("unknown record kind '" + kind + "'");
            }
        }
    }

    const std::vector<ScoreRevision>& revisions_of(const std::string& id) const {
        auto it = revisions.find(id);
        if (it == revisions.end()) throw unknown_iu(id);
        return it->second;
    }
};

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::open(const std::filesystem::path& path, StoreMode mode, StoreOptions options) {
    auto impl = std::make_unique<Impl>();
    impl->path = path;
    impl->options = std::move(options);
    impl->writable = mode == StoreMode::Writer;

    if (impl->writable) {
        impl->lock = acquire_writer_lock(path);
    } else if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::NotFound, "store_missing",
                    "store " + path.string() + " does not exist (run `tom init`)");
    }

    std::string content;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot read " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        content = ss.str();
    }
    // A trailing fragment without newline is an append that never completed.
    const auto last_nl = content.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    const bool torn = complete != content.size();
    content.resize(complete);
    impl->load(content);

    if (impl->writable) {
        if (torn) std::filesystem::resize_file(path, complete);
        impl->out = FileHandle(::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644));
        if (!impl->out) throw io_error("cannot open " + path.string() + " for append");
    }
    return Store(std::move(impl));
}

void Store::init(const std::filesystem::path& path) {
    open(path, StoreMode::Writer);
}

Store Store::in_memory(StoreOptions options) {
    auto impl = std::make_unique<Impl>();
    impl->options = std::move(options);
    impl->writable = true;
    return Store(std::move(impl));
}

bool Store::writable() const noexcept { return impl_->writable; }

const std::filesystem::path& Store::path() const noexcept { return impl_->path; }

IURecord Store::upsert_iu(IURecord record) {
    if (!impl_->writable) {
        throw Error(ErrorCode::Conflict, "read_only_store", "store opened read-only");
    }
    if (auto v = record_violations(record); !v.empty()) {
        throw Error(ErrorCode::InvalidInput, "invalid_record", "invalid IU record", std::move(v));
    }
    std::unique_lock lock(impl_->mu);
    if (auto it = impl_->ius.find(record.id); it != impl_->ius.end()) {
        record.created_at = it->second.created_at;
    } else if (record.created_at.empty()) {
        record.created_at = format_utc(impl_->options.clock());
    }
    impl_->append_line(to_json(record));
    impl_->apply_iu(record);
    return record;
}

ScoreRevision Store::append_revision(const std::string& iu_id, const ScoreCard& card,
                                     std::string note, std::optional<int> expected_latest) {
    if (!impl_->writable) {
        throw Error(ErrorCode::Conflict, "read_only_store", "store opened read-only");
    }
    require_valid(card);
    std::unique_lock lock(impl_->mu);
    auto it = impl_->revisions.find(iu_id);
    if (it == impl_->revisions.end()) throw unknown_iu(iu_id);
    const int latest = static_cast<int>(it->second.size());
    if (expected_latest && *expected_latest != latest) {
        throw Error(ErrorCode::Conflict, "stale_revision",
                    "expected latest revision " + std::to_string(*expected_latest) + " of " +
                        iu_id + " but it is " + std::to_string(latest));
    }
    ScoreRevision rev;
    rev.iu_id = iu_id;
    rev.revision_no = latest + 1;
    // Stored in canonical order regardless of input order.
    for (Criterion c : kAllCriteria) rev.card.add(*card.find(c));
    rev.composite = composite(rev.card);
    rev.recorded_at = format_utc(impl_->options.clock());
    rev.note = std::move(note);
    impl_->append_line(to_json(rev));
    it->second.push_back(rev);
    return rev;
}

std::optional<ScoreRevision> Store::latest_score(const std::string& iu_id) const {
    std::shared_lock lock(impl_->mu);
    const auto& revs = impl_->revisions_of(iu_id);
    if (revs.empty()) return std::nullopt;
    return revs.back();
}

std::vector<ScoreRevision> Store::history(const std::string& iu_id) const {
    std::shared_lock lock(impl_->mu);
    return impl_->revisions_of(iu_id);
}

std::vector<RankEntry> Store::rank() const {
    std::vector<RankEntry> out;
    {
        std::shared_lock lock(impl_->mu);
        for (const auto& [id, revs] : impl_->revisions) {
            if (!revs.empty()) out.push_back({id, revs.back().composite.value});
        }
    }
    sort_rank(out);
    return out;
}

bool Store::contains(const std::string& iu_id) const {
    std::shared_lock lock(impl_->mu);
    return impl_->ius.count(iu_id) != 0;
}

IURecord Store::get_iu(const std::string& iu_id) const {
    std::shared_lock lock(impl_->mu);
    auto it = impl_->ius.find(iu_id);
    if (it == impl_->ius.end()) throw unknown_iu(iu_id);
    return it->second;
}

std::vector<IURecord> Store::ius() const {
    std::shared_lock lock(impl_->mu);
    std::vector<IURecord> out;
    out.reserve(impl_->ius.size());
    for (const auto& [id, r] : impl_->ius) out.push_back(r);
    return out;
}

}  // namespace tom
