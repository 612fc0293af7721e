#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tutorstack/kb/bm25.hpp"
#include "tutorstack/kb/chunker.hpp"
#include "tutorstack/kb/fetch.hpp"

namespace tutorstack::kb {

inline constexpr const char* kManualSource = "manual";

struct Document {
    std::string doc_id;
    std::string source_url;  // or "manual"
    std::string title;
    std::int64_t fetched_at = 0;  // ms since epoch
    std::string text;
    std::size_t chunk_count = 0;

    bool operator==(const Document&) const = default;
};

struct SearchHit {
    std::string doc_id;
    std::size_t chunk_index = 0;
    double score = 0.0;
    std::string text;
    std::string title;
    std::string source_url;
};

/// Raised when a source yields no indexable text.
class EmptyDocumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the on-disk records are inconsistent.
class CorruptStoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable committed state: documents in commit order, their chunks and the
/// index over them (chunk ref i is chunks()[i]).
class KbSnapshot {
public:
    KbSnapshot() = default;

    const std::vector<Document>& documents() const { return docs_; }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const Bm25Index& index() const { return index_; }

    const Document* find_document(const std::string& doc_id) const;
    const Chunk* find_chunk(const std::string& doc_id, std::size_t chunk_index) const;

    /// Highest scores first, ties by (doc_id, chunk_index); zero scores excluded.
    std::vector<SearchHit> search(const std::string& query, std::size_t top_k = 5) const;

    /// Copy with one more document appended.
    std::shared_ptr<KbSnapshot> with(Document doc, std::vector<Chunk> chunks) const;

    /// In-place append; only valid before the snapshot is shared.
    void append(Document doc, std::vector<Chunk> chunks);

private:
    std::vector<Document> docs_;
    std::vector<Chunk> chunks_;
    Bm25Index index_;
    std::map<std::string, std::size_t> doc_pos_;
    std::map<std::string, std::size_t> first_chunk_;
};

struct IngestResult {
    std::string doc_id;
    std::size_t chunks = 0;
    bool created = false;
};

using Clock = std::function<std::int64_t()>;

/// Milliseconds since the Unix epoch from the system clock.
std::int64_t system_clock_ms();

/// Document store under `<root>/kb/` (docs.jsonl and chunks.jsonl).
/// Readers take immutable snapshots; ingests are serialized. A document
/// becomes visible only once its record follows all of its chunk records
/// on disk, so an interrupted ingest is ignored on reopen.
class KnowledgeBase {
public:
    explicit KnowledgeBase(const std::filesystem::path& root, Fetcher fetcher = default_fetcher(),
                           Clock clock = system_clock_ms);

    static Fetcher default_fetcher();

    IngestResult ingest_url(const std::string& url);
    IngestResult ingest_html(const std::string& source_url, const std::string& html);
    IngestResult ingest_manual(const std::string& title, const std::string& text);

    std::shared_ptr<const KbSnapshot> snapshot() const;
    std::vector<SearchHit> search(const std::string& query, std::size_t top_k = 5) const;
    std::size_t document_count() const { return snapshot()->documents().size(); }

    const std::filesystem::path& directory() const { return dir_; }

private:
    IngestResult commit(const std::string& source, const std::string& title, const std::string& text);
    void load();

    std::filesystem::path dir_;
    Fetcher fetcher_;
    Clock clock_;
    mutable std::mutex snapshot_mutex_;
    std::mutex writer_mutex_;
    std::shared_ptr<const KbSnapshot> snapshot_;
};

/// Document id: FNV-1a over the source and text.
std::string document_id(const std::string& source, const std::string& text);

}  // namespace tutorstack::kb
