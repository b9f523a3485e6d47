#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tom/clock.hpp"
#include "tom/records.hpp"

namespace tom {

enum class StoreMode { Reader, Writer };

struct StoreOptions {
    UtcClock clock = system_now;
};

/// Revision-tracked IU store backed by an append-only line-delimited file.
///
/// One writer per store file at a time, enforced by an exclusive lock on
/// `<path>.lock` that is held for the writer's lifetime. Readers take no
/// lock and see the file as it was when they opened it. Every record is
/// written with a single write() followed by fsync() before the call
/// returns; an interrupted trailing line is dropped on the next open.
///
/// All members are safe to call concurrently; writes are serialized.
class Store {
public:
    /// Writer mode creates the file when absent. Reader mode requires it.
    /// Throws Error kinds: store_lock_held, store_missing, corrupt_store, io_error.
    static Store open(const std::filesystem::path& path, StoreMode mode, StoreOptions options = {});

    /// Creates an empty store file if none exists (takes and releases the writer lock).
    static void init(const std::filesystem::path& path);

    /// Non-persistent writable store.
    static Store in_memory(StoreOptions options = {});

    Store(Store&&) noexcept;
    Store& operator=(Store&&) noexcept;
    ~Store();

    bool writable() const noexcept;
    const std::filesystem::path& path() const noexcept;

    /// Inserts a new IU or replaces name, description, description_source
    /// and tags of an existing one. created_at and history are preserved.
    IURecord upsert_iu(IURecord record);

    /// Appends revision max+1. When `expected_latest` is set, it must equal
    /// the current latest revision_no (0 for none) or Error{Conflict} is thrown.
    ScoreRevision append_revision(const std::string& iu_id, const ScoreCard& card,
                                  std::string note, std::optional<int> expected_latest = {});

    std::optional<ScoreRevision> latest_score(const std::string& iu_id) const;
    std::vector<ScoreRevision> history(const std::string& iu_id) const;

    /// Scored IUs by latest composite descending, ties by id ascending.
    std::vector<RankEntry> rank() const;

    bool contains(const std::string& iu_id) const;
    IURecord get_iu(const std::string& iu_id) const;

    /// All IUs ordered by id.
    std::vector<IURecord> ius() const;

private:
    struct Impl;
    explicit Store(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// Canonical rank order over (id, composite) pairs.
void sort_rank(std::vector<RankEntry>& entries);

}  // namespace tom
