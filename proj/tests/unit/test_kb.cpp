#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "test_support.hpp"
#include "tutorstack/kb/bm25.hpp"
#include "tutorstack/kb/chunker.hpp"
#include "tutorstack/kb/fetch.hpp"
#include "tutorstack/kb/html_extract.hpp"
#include "tutorstack/kb/knowledge_base.hpp"
#include "tutorstack/kb/text.hpp"
#include "tutorstack/util/random.hpp"

using namespace tutorstack;
using namespace tutorstack::kb;
using tutorstack::testing::StubServer;
using tutorstack::testing::TempDir;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out.push_back(' ');
        out += stem + std::to_string(i);
    }
    return out;
}

Fetcher no_network() {
    return [](const std::string& url) -> FetchResult {
        throw FetchError(FetchErrorKind::network, "offline: " + url);
    };
}

Clock fixed_clock() {
    return [] { return std::int64_t{1'700'000'000'000}; };
}

// Independent BM25 straight from the formula over raw token lists.
double brute_bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                  std::size_t d) {
    const double N = static_cast<double>(docs.size());
    double total_len = 0.0;
    for (const auto& doc : docs) total_len += static_cast<double>(doc.size());
    const double avg = total_len / N;
    std::set<std::string> terms(query.begin(), query.end());
    double score = 0.0;
    for (const auto& t : terms) {
        double n = 0.0;
        for (const auto& doc : docs) n += std::find(doc.begin(), doc.end(), t) != doc.end() ? 1.0 : 0.0;
        const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), t));
        if (tf == 0.0) continue;
        const double idf = std::log(1.0 + (N - n + 0.5) / (n + 0.5));
        const double len = static_cast<double>(docs[d].size());
        score += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len / avg));
    }
    return score;
}

}  // namespace

TEST_CASE("extract_text examples") {
    CHECK(extract_text("<p>Hello <b>world</b></p>").text == "Hello world");

    const auto page = extract_text("<script>x=1</script><h1>Rank</h1>");
    CHECK(page.text == "# Rank");
    CHECK(page.title == "Rank");

    CHECK(extract_text("<figcaption>Fig 1: a matrix</figcaption>").text == "Fig 1: a matrix");
}

TEST_CASE("extract_text structure rules") {
    const std::string html = R"(<!DOCTYPE html>
<html><head><title> Linear   Algebra </title><style>p{color:red}</style></head>
<body>
<nav><a href="/">Home</a> | <a href="/x">Other</a></nav>
<h1>Vectors</h1>
<p>A   vector is
   an <em>ordered</em> list.</p>
<h3>Operations</h3>
<ul><li>Addition</li><li>Scaling &amp; <i>dot</i> product</li></ul>
<!-- a comment <p>hidden</p> -->
<figure><img src="a.png" alt="ignored"><figcaption>Figure 2: basis</figcaption></figure>
<div class="video-caption">Lecture subtitle line</div>
<video><track kind="subtitles" label="English captions" src="a.vtt"></video>
<footer>Copyright 2024</footer>
<script type="text/javascript">document.write("<p>nope</p>")</script>
</body></html>)";
    const auto page = extract_text(html);
    CHECK(page.title == "Linear Algebra");
    CHECK(page.text ==
          "# Vectors\n\n"
          "A vector is an ordered list.\n\n"
          "### Operations\n\n"
          "- Addition\n\n"
          "- Scaling & dot product\n\n"
          "Figure 2: basis\n\n"
          "Lecture subtitle line\n\n"
          "English captions");
}

TEST_CASE("extract_text edge cases") {
    CHECK(extract_text("").text.empty());
    CHECK(extract_text("").title.empty());
    const auto plain = extract_text("just some words without markup");
    CHECK(plain.text.empty());
    CHECK(plain.title.empty());

    CHECK(extract_text("<p>caf\xC3\xA9 \xFF end</p>").text == "caf\xC3\xA9 \xEF\xBF\xBD end");
    CHECK(extract_text("<p>&#65;&#x42;&lt;c&gt; &unknown; a&b</p>").text == "AB<c> &unknown; a&b");
    CHECK(extract_text("<p>1 < 2</p>").text == "1 < 2");
    CHECK(extract_text("<h2>A<br>B</h2>").text == "## A\n\n## B");
    CHECK(extract_text("<nav><p>x<nav>y</nav>z</p></nav><p>kept</p>").text == "kept");
    CHECK(extract_text("<h1>Only</h1>", "http://x/").title == "Only");
    CHECK(extract_text("<p>body</p>", "http://x/page").title == "http://x/page");
    CHECK(extract_text("<title>T</title><h1>H</h1>").title == "T");
}

TEST_CASE("extract_text is deterministic and idempotent on random pages") {
    Rng rng(21);
    const std::vector<std::string> vocab = {"matrix", "rank", "&amp;", "vector", "a<b", "x>y", "caf\xC3\xA9",
                                            "&lt;tag&gt;", "  ", "\n", "basis", "#", "-"};
    const std::vector<std::string> blocks = {"p", "div", "li", "h2", "h5", "figcaption", "section"};
    const std::vector<std::string> inlines = {"b", "span", "a", "em"};
    for (int round = 0; round < 300; ++round) {
        std::string html = "<html><body>";
        const std::size_t nb = 1 + rng.below(8);
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& tag = blocks[rng.below(blocks.size())];
            html += "<" + tag + ">";
            const std::size_t nw = rng.below(6);
            for (std::size_t w = 0; w < nw; ++w) {
                if (rng.bernoulli(0.2)) {
                    const auto& in = inlines[rng.below(inlines.size())];
                    html += "<" + in + ">" + vocab[rng.below(vocab.size())] + "</" + in + ">";
                } else {
                    html += vocab[rng.below(vocab.size())];
                }
                html += rng.bernoulli(0.8) ? " " : "";
            }
            if (rng.bernoulli(0.2)) html += "<script>var s = '<p>no</p>';</script>";
            html += "</" + tag + ">";
        }
        html += "</body></html>";
        const auto first = extract_text(html);
        CHECK(extract_text(html).text == first.text);
        if (first.text.empty()) continue;
        CHECK(extract_text(render_paragraphs_html(first.text)).text == first.text);
    }
}

TEST_CASE("tokenize and hashing") {
    CHECK(tokenize("Linear-Algebra: RANK(2)!") == std::vector<std::string>{"linear", "algebra", "rank", "2"});
    CHECK(tokenize("caf\xC3\xA9 x") == std::vector<std::string>{"caf\xC3\xA9", "x"});
    CHECK(tokenize("  ").empty());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(document_id("u", "t") != document_id("u", "t2"));
    CHECK(document_id("ab", "c") != document_id("a", "bc"));
}

TEST_CASE("chunk_text examples") {
    const auto c450 = chunk_text(words(450));
    REQUIRE(c450.size() == 3);
    CHECK(c450[0].word_start == 0);
    CHECK(c450[1].word_start == 160);
    CHECK(c450[2].word_start == 320);
    CHECK(c450[2].word_end == 450);
    CHECK(chunk_text(words(10)).size() == 1);
    CHECK(chunk_text("").empty());
    CHECK(chunk_text("   \n ").empty());
    CHECK_THROWS_AS(chunk_text("a b", 10, 10), std::invalid_argument);
    // The short-tail rule only matters when the overlap is below the tail minimum.
    CHECK(chunk_text(words(110), 100, 0).size() == 1);
    CHECK(chunk_text(words(125), 100, 0).size() == 2);
}

TEST_CASE("chunks tile the text with exact overlaps") {
    Rng rng(4);
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = rng.below(900);
        const std::size_t window = 5 + rng.below(200);
        const std::size_t overlap = rng.below(window);
        const auto text = words(n);
        const auto all = split_words(text);
        const auto chunks = chunk_text(text, window, overlap);
        if (n == 0) {
            CHECK(chunks.empty());
            continue;
        }
        REQUIRE_FALSE(chunks.empty());
        CHECK(chunks.front().word_start == 0);
        std::size_t covered = 0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            const auto& c = chunks[i];
            CHECK(c.chunk_index == i);
            CHECK(c.word_end - c.word_start <= window);
            CHECK(split_words(c.text).size() == c.word_end - c.word_start);
            CHECK(split_words(c.text).front() == all[c.word_start]);
            if (i > 0) {
                CHECK(c.word_start == chunks[i - 1].word_start + window - overlap);
                if (i + 1 < chunks.size()) CHECK(chunks[i - 1].word_end - c.word_start == overlap);
            }
            covered = std::max(covered, c.word_end);
        }
        if (covered < n) {
            // Only a short tail may be dropped, and never under the default overlap.
            CHECK(overlap < kMinTailWords);
            CHECK(n - (chunks.back().word_start + window - overlap) < kMinTailWords);
        }
    }
}

TEST_CASE("bm25 examples") {
    KbSnapshot snap;
    snap.append({"d1", "manual", "d1", 0, "linear algebra", 1}, {{"d1", 0, "linear algebra", 0, 2}});
    snap.append({"d2", "manual", "d2", 0, "matrix rank", 1}, {{"d2", 0, "matrix rank", 0, 2}});
    CHECK(snap.index().score({"algebra"}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(snap.index().score({"algebra"}, 1) == 0.0);
    CHECK(snap.index().score({"missing"}, 0) == 0.0);
    CHECK(snap.index().score({"algebra", "algebra"}, 0) == snap.index().score({"algebra"}, 0));

    const auto hits = snap.search("Algebra!");
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].doc_id == "d1");
    CHECK(snap.search("algebra rank", 1).size() == 1);
    CHECK(snap.search("nothing here").empty());
    CHECK(KbSnapshot().search("anything").empty());

    KbSnapshot dup;
    for (const char* id : {"b", "a", "c"}) {
        dup.append({id, "manual", id, 0, "same text here", 1}, {{id, 0, "same text here", 0, 3}});
    }
    // Every term appears everywhere, yet the modified idf keeps scores positive.
    const auto tied = dup.search("text");
    REQUIRE(tied.size() == 3);
    CHECK(tied[0].score == tied[1].score);
    CHECK(tied[1].score == tied[2].score);
    CHECK(tied[0].doc_id == "a");
    CHECK(tied[1].doc_id == "b");
    CHECK(tied[2].doc_id == "c");
}

TEST_CASE("search equals brute-force bm25 ranking on random corpora") {
    Rng rng(77);
    const std::vector<std::string> vocab = {"matrix", "rank", "vector", "basis", "span",
                                            "kernel", "image", "eigen", "value", "trace",
                                            "det", "norm", "dot", "cross", "unit"};
    for (int round = 0; round < 100; ++round) {
        KbSnapshot snap;
        std::vector<std::vector<std::string>> docs;
        std::vector<std::pair<std::string, std::size_t>> refs;
        const std::size_t nchunks = 1 + rng.below(50);
        std::size_t made = 0;
        for (std::size_t d = 0; made < nchunks; ++d) {
            const std::string id = "doc" + std::to_string(rng.below(1000)) + "_" + std::to_string(d);
            const std::size_t per_doc = std::min<std::size_t>(1 + rng.below(3), nchunks - made);
            std::vector<Chunk> chunks;
            for (std::size_t c = 0; c < per_doc; ++c) {
                std::vector<std::string> toks;
                std::string text;
                const std::size_t len = 1 + rng.below(12);
                for (std::size_t w = 0; w < len; ++w) {
                    toks.push_back(vocab[rng.below(vocab.size())]);
                    text += (w ? " " : "") + toks.back();
                }
                docs.push_back(toks);
                refs.emplace_back(id, c);
                chunks.push_back({id, c, text, 0, len});
            }
            made += per_doc;
            snap.append({id, "manual", id, 0, "", per_doc}, std::move(chunks));
        }
        CHECK(snap.index().size() == docs.size());

        std::vector<std::string> query;
        const std::size_t qlen = 1 + rng.below(4);
        for (std::size_t q = 0; q < qlen; ++q) query.push_back(vocab[rng.below(vocab.size())]);
        std::string qtext;
        for (const auto& q : query) qtext += q + " ";

        std::vector<std::tuple<double, std::string, std::size_t>> expected;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            const double s = brute_bm25(docs, query, d);
            if (s > 0.0) expected.emplace_back(s, refs[d].first, refs[d].second);
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            if (std::abs(std::get<0>(a) - std::get<0>(b)) > 1e-12) return std::get<0>(a) > std::get<0>(b);
            return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
        });
        const std::size_t top_k = 1 + rng.below(10);
        const auto hits = snap.search(qtext, top_k);
        REQUIRE(hits.size() == std::min(top_k, expected.size()));
        for (std::size_t i = 0; i < hits.size(); ++i) {
            CHECK(hits[i].score == doctest::Approx(std::get<0>(expected[i])).epsilon(1e-9));
            CHECK(hits[i].doc_id == std::get<1>(expected[i]));
            CHECK(hits[i].chunk_index == std::get<2>(expected[i]));
        }
    }
}

TEST_CASE("knowledge base ingest, idempotence and statistics") {
    TempDir tmp("kb_ingest");
    KnowledgeBase kb(tmp.path, no_network(), fixed_clock());
    const auto r1 = kb.ingest_manual("Long notes", words(450, "t"));
    CHECK(r1.created);
    CHECK(r1.chunks == 3);
    const auto r2 = kb.ingest_manual("Long notes", words(450, "t"));
    CHECK_FALSE(r2.created);
    CHECK(r2.doc_id == r1.doc_id);
    CHECK(kb.document_count() == 1);
    const auto doc = kb.snapshot()->find_document(r1.doc_id);
    REQUIRE(doc != nullptr);
    CHECK(doc->source_url == "manual");
    CHECK(doc->fetched_at == 1'700'000'000'000);

    kb.ingest_html("http://example.test/a", "<h1>Rank</h1><p>The rank of a matrix</p>");
    kb.ingest_manual("Short", "matrix rank nullity theorem");
    CHECK_THROWS_AS(kb.ingest_manual("Empty", "  "), EmptyDocumentError);
    CHECK_THROWS_AS(kb.ingest_html("http://example.test/b", "no markup"), EmptyDocumentError);
    CHECK_THROWS_AS(kb.ingest_url("http://example.test/c"), FetchError);
    CHECK(kb.document_count() == 3);

    const auto snap = kb.snapshot();
    std::size_t total = 0;
    for (const auto& c : snap->chunks()) total += tokenize(c.text).size();
    CHECK(snap->index().size() == snap->chunks().size());
    CHECK(snap->index().total_length() == total);
    CHECK(snap->index().average_length() ==
          doctest::Approx(static_cast<double>(total) / static_cast<double>(snap->chunks().size())));
    CHECK(kb.search("rank")[0].title == "Rank");
}

TEST_CASE("knowledge base persistence round trip and torn writes") {
    TempDir tmp("kb_persist");
    std::vector<std::string> queries = {"matrix", "rank basis", "t5 t170", "vector space", "zzz"};
    std::map<std::string, std::vector<std::tuple<std::string, std::size_t, double>>> before;
    {
        KnowledgeBase kb(tmp.path, no_network(), fixed_clock());
        kb.ingest_manual("A", words(300, "t") + " matrix rank");
        kb.ingest_manual("B", "vector space basis matrix");
        kb.ingest_html("http://x.test/", "<h2>Basis</h2><p>a basis spans the vector space</p>");
        for (const auto& q : queries) {
            for (const auto& h : kb.search(q, 10)) before[q].emplace_back(h.doc_id, h.chunk_index, h.score);
        }
    }
    // An ingest that died after writing chunks and half a record.
    {
        std::ofstream chunks(tmp.path / "kb" / "chunks.jsonl", std::ios::app);
        chunks << R"({"doc_id":"orphan","chunk_index":0,"word_start":0,"word_end":1,"text":"matrix"})" << "\n";
        std::ofstream docs(tmp.path / "kb" / "docs.jsonl", std::ios::app);
        docs << R"({"doc_id":"orph)";
    }
    KnowledgeBase reopened(tmp.path, no_network(), fixed_clock());
    CHECK(reopened.document_count() == 3);
    for (const auto& q : queries) {
        std::vector<std::tuple<std::string, std::size_t, double>> after;
        for (const auto& h : reopened.search(q, 10)) after.emplace_back(h.doc_id, h.chunk_index, h.score);
        CHECK(after == before[q]);
    }
    reopened.ingest_manual("C", "fresh content after repair");
    KnowledgeBase again(tmp.path, no_network(), fixed_clock());
    CHECK(again.document_count() == 4);
}

TEST_CASE("url parsing") {
    const auto u = parse_url("HTTP://Example.test:8080/a/b?x=1#frag");
    CHECK(u.scheme == "http");
    CHECK(u.port == 8080);
    CHECK(u.target == "/a/b?x=1");
    CHECK(parse_url("https://h").target == "/");
    CHECK(parse_url("https://h").port == 443);
    CHECK(resolve_location(u, "/c") == "http://Example.test:8080/c");
    CHECK(resolve_location(u, "d") == "http://Example.test:8080/a/d");
    CHECK(resolve_location(u, "https://o/p") == "https://o/p");
    try {
        parse_url("ftp://files.test/x");
        FAIL("expected scheme rejection");
    } catch (const FetchError& e) {
        CHECK(e.kind() == FetchErrorKind::scheme_rejected);
    }
    CHECK_THROWS_AS(parse_url("not a url"), FetchError);
    CHECK_THROWS_AS(parse_url("http://h:99999/"), FetchError);
}

TEST_CASE("fetch against a local server") {
    StubServer stub;
    auto& s = stub.server();
    s.Get("/ok", [](const httplib::Request&, httplib::Response& r) {
        r.set_content("<p>hello</p>", "text/html");
    });
    s.Get("/missing", [](const httplib::Request&, httplib::Response& r) { r.status = 404; });
    s.Get("/boom", [](const httplib::Request&, httplib::Response& r) { r.status = 500; });
    s.Get(R"(/hop/(\d+))", [](const httplib::Request& req, httplib::Response& r) {
        const int n = std::stoi(req.matches[1]);
        if (n == 0) {
            r.set_content("<p>landed</p>", "text/html");
        } else {
            r.set_redirect("/hop/" + std::to_string(n - 1));
        }
    });
    s.Get("/big", [](const httplib::Request&, httplib::Response& r) {
        r.set_content(std::string(2048, 'x'), "text/plain");
    });
    s.Get("/slow", [](const httplib::Request&, httplib::Response& r) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        r.set_content("late", "text/plain");
    });

    const auto ok = fetch(stub.url("/ok"));
    CHECK(ok.body == "<p>hello</p>");
    CHECK(ok.content_type == "text/html");

    auto kind_of = [](const std::function<void()>& f) {
        try {
            f();
        } catch (const FetchError& e) {
            return std::string(to_string(e.kind()));
        }
        return std::string("none");
    };
    CHECK(kind_of([&] { fetch(stub.url("/missing")); }) == "not_found");
    CHECK(kind_of([&] { fetch(stub.url("/boom")); }) == "http_status");
    CHECK(fetch(stub.url("/hop/3")).body == "<p>landed</p>");
    CHECK(fetch(stub.url("/hop/3")).final_url == stub.url("/hop/0"));
    CHECK(kind_of([&] { fetch(stub.url("/hop/4")); }) == "too_many_redirects");
    FetchOptions small;
    small.max_bytes = 1024;
    CHECK(kind_of([&] { fetch(stub.url("/big"), small); }) == "too_large");
    FetchOptions quick;
    quick.timeout = std::chrono::milliseconds(400);
    CHECK(kind_of([&] { fetch(stub.url("/slow"), quick); }) == "timeout");
    CHECK(kind_of([&] { fetch("ftp://127.0.0.1/x"); }) == "scheme_rejected");
    CHECK(kind_of([&] { fetch("http://127.0.0.1:1/"); }) == "network");

    TempDir tmp("kb_fetch");
    KnowledgeBase kb(tmp.path, KnowledgeBase::default_fetcher(), fixed_clock());
    const auto r = kb.ingest_url(stub.url("/ok"));
    CHECK(r.created);
    CHECK(kb.ingest_url(stub.url("/ok")).created == false);
    CHECK(kind_of([&] { kb.ingest_url(stub.url("/missing")); }) == "not_found");
    CHECK(kb.document_count() == 1);
}
