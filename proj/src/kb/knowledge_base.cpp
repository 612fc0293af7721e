#include "tutorstack/kb/knowledge_base.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tutorstack/kb/html_extract.hpp"
#include "tutorstack/kb/text.hpp"

namespace tutorstack::kb {

namespace {

using nlohmann::json;

constexpr const char* kDocsFile = "docs.jsonl";
constexpr const char* kChunksFile = "chunks.jsonl";

// Appends complete lines and fsyncs before returning.
void append_lines(const std::filesystem::path& path, const std::string& data) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < data.size()) {
        const auto n = ::write(fd, data.data() + written, data.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const std::string err = std::strerror(errno);
            ::close(fd);
            throw std::runtime_error("write failed for " + path.string() + ": " + err);
        }
        written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
}

// Reads complete lines; a torn final line (no trailing newline) is cut off
// the file so later appends start on a fresh line.
std::vector<std::string> read_lines_repairing(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    if (!std::filesystem::exists(path)) return lines;
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    const auto last_nl = data.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (complete != data.size()) {
        in.close();
        std::filesystem::resize_file(path, complete);
    }
    std::size_t start = 0;
    while (start < complete) {
        const auto nl = data.find('\n', start);
        if (nl > start) lines.push_back(data.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

json doc_to_json(const Document& d) {
    return {{"doc_id", d.doc_id}, {"source_url", d.source_url}, {"title", d.title},
            {"fetched_at", d.fetched_at}, {"chunks", d.chunk_count}, {"text", d.text}};
}

json chunk_to_json(const Chunk& c) {
    return {{"doc_id", c.doc_id}, {"chunk_index", c.chunk_index}, {"word_start", c.word_start},
            {"word_end", c.word_end}, {"text", c.text}};
}

}  // namespace

std::int64_t system_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string document_id(const std::string& source, const std::string& text) {
    std::string key = source;
    key.push_back('\0');
    key += text;
    return fnv1a_hex(key);
}

const Document* KbSnapshot::find_document(const std::string& doc_id) const {
    const auto it = doc_pos_.find(doc_id);
    return it == doc_pos_.end() ? nullptr : &docs_[it->second];
}

const Chunk* KbSnapshot::find_chunk(const std::string& doc_id, std::size_t chunk_index) const {
    const auto doc = find_document(doc_id);
    if (!doc || chunk_index >= doc->chunk_count) return nullptr;
    return &chunks_[first_chunk_.at(doc_id) + chunk_index];
}

std::vector<SearchHit> KbSnapshot::search(const std::string& query, std::size_t top_k) const {
    auto scored = index_.score_all(tokenize(query));
    const auto better = [&](const std::pair<std::uint32_t, double>& a,
                            const std::pair<std::uint32_t, double>& b) {
        if (a.second != b.second) return a.second > b.second;
        const auto& ca = chunks_[a.first];
        const auto& cb = chunks_[b.first];
        if (ca.doc_id != cb.doc_id) return ca.doc_id < cb.doc_id;
        return ca.chunk_index < cb.chunk_index;
    };
    const std::size_t n = std::min(top_k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      better);
    std::vector<SearchHit> hits;
    hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = chunks_[scored[i].first];
        const auto& d = docs_[doc_pos_.at(c.doc_id)];
        hits.push_back({c.doc_id, c.chunk_index, scored[i].second, c.text, d.title, d.source_url});
    }
    return hits;
}

std::shared_ptr<KbSnapshot> KbSnapshot::with(Document doc, std::vector<Chunk> chunks) const {
    auto next = std::make_shared<KbSnapshot>(*this);
    next->append(std::move(doc), std::move(chunks));
    return next;
}

void KbSnapshot::append(Document doc, std::vector<Chunk> chunks) {
    doc_pos_[doc.doc_id] = docs_.size();
    first_chunk_[doc.doc_id] = chunks_.size();
    for (auto& c : chunks) {
        index_.add(tokenize(c.text));
        chunks_.push_back(std::move(c));
    }
    docs_.push_back(std::move(doc));
}

KnowledgeBase::KnowledgeBase(const std::filesystem::path& root, Fetcher fetcher, Clock clock)
    : dir_(root / "kb"), fetcher_(std::move(fetcher)), clock_(std::move(clock)) {
    std::filesystem::create_directories(dir_);
    load();
}

Fetcher KnowledgeBase::default_fetcher() {
    return [](const std::string& url) { return fetch(url); };
}

void KnowledgeBase::load() {
    const auto chunk_lines = read_lines_repairing(dir_ / kChunksFile);
    const auto doc_lines = read_lines_repairing(dir_ / kDocsFile);

    std::map<std::pair<std::string, std::size_t>, Chunk> chunks;
    for (const auto& line : chunk_lines) {
        try {
            const auto j = json::parse(line);
            Chunk c;
            c.doc_id = j.at("doc_id").get<std::string>();
            c.chunk_index = j.at("chunk_index").get<std::size_t>();
            c.word_start = j.at("word_start").get<std::size_t>();
            c.word_end = j.at("word_end").get<std::size_t>();
            c.text = j.at("text").get<std::string>();
            // Later records win: an interrupted ingest may be retried.
            chunks[{c.doc_id, c.chunk_index}] = std::move(c);
        } catch (const json::exception& e) {
            throw CorruptStoreError((dir_ / kChunksFile).string() + ": " + e.what());
        }
    }

    auto snap = std::make_shared<KbSnapshot>();
    std::set<std::string> seen;
    for (const auto& line : doc_lines) {
        Document d;
        try {
            const auto j = json::parse(line);
            d.doc_id = j.at("doc_id").get<std::string>();
            d.source_url = j.at("source_url").get<std::string>();
            d.title = j.at("title").get<std::string>();
            d.fetched_at = j.at("fetched_at").get<std::int64_t>();
            d.chunk_count = j.at("chunks").get<std::size_t>();
            d.text = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw CorruptStoreError((dir_ / kDocsFile).string() + ": " + e.what());
        }
        if (!seen.insert(d.doc_id).second) continue;
        std::vector<Chunk> own;
        for (std::size_t i = 0; i < d.chunk_count; ++i) {
            const auto it = chunks.find({d.doc_id, i});
            if (it == chunks.end()) {
                throw CorruptStoreError("document " + d.doc_id + " is missing chunk " +
                                        std::to_string(i));
            }
            own.push_back(it->second);
        }
        snap->append(std::move(d), std::move(own));
    }
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
}

std::shared_ptr<const KbSnapshot> KnowledgeBase::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

std::vector<SearchHit> KnowledgeBase::search(const std::string& query, std::size_t top_k) const {
    return snapshot()->search(query, top_k);
}

IngestResult KnowledgeBase::ingest_url(const std::string& url) {
    const auto fetched = fetcher_(url);
    return ingest_html(url, fetched.body);
}

IngestResult KnowledgeBase::ingest_html(const std::string& source_url, const std::string& html) {
    const auto page = extract_text(html, source_url);
    if (page.text.empty()) throw EmptyDocumentError(source_url + ": no extractable text");
    return commit(source_url, page.title, page.text);
}

IngestResult KnowledgeBase::ingest_manual(const std::string& title, const std::string& text) {
    const auto clean = sanitize_utf8(text);
    if (split_words(clean).empty()) throw EmptyDocumentError("manual document has no text");
    return commit(kManualSource, title, clean);
}

IngestResult KnowledgeBase::commit(const std::string& source, const std::string& title,
                                   const std::string& text) {
    std::lock_guard writer(writer_mutex_);
    const auto current = snapshot();
    Document doc;
    doc.doc_id = document_id(source, text);
    if (const auto existing = current->find_document(doc.doc_id)) {
        return {existing->doc_id, existing->chunk_count, false};
    }
    auto chunks = chunk_text(text);
    for (auto& c : chunks) c.doc_id = doc.doc_id;
    doc.source_url = source;
    doc.title = title;
    doc.fetched_at = clock_();
    doc.text = text;
    doc.chunk_count = chunks.size();

    std::string chunk_data;
    for (const auto& c : chunks) chunk_data += chunk_to_json(c).dump() + "\n";
    append_lines(dir_ / kChunksFile, chunk_data);
    append_lines(dir_ / kDocsFile, doc_to_json(doc).dump() + "\n");

    IngestResult result{doc.doc_id, doc.chunk_count, true};
    auto next = current->with(std::move(doc), std::move(chunks));
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(next);
    return result;
}

}  // namespace tutorstack::kb
