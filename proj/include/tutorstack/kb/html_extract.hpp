#pragma once

#include <string>
#include <string_view>

namespace tutorstack::kb {

struct ExtractedPage {
    std::string title;
    std::string text;
};

/// Converts an HTML page into paragraph-structured plain text.
///
/// script, style, nav, footer, noscript and template subtrees are dropped.
/// Headings become `#`-prefixed lines, list items `- ` lines, and caption
/// content (figcaption, table captions, track labels, elements whose class
/// mentions caption/subtitle/transcript) is kept in reading order. Whitespace
/// is collapsed and paragraphs are separated by one blank line. The title is
/// the <title> element, or the first <h1> when that is absent.
///
/// Invalid UTF-8 is replaced with U+FFFD. Input without any markup yields an
/// empty page. `base_url` is only used as the title of last resort.
ExtractedPage extract_text(std::string_view html, std::string_view base_url = {});

/// Wraps each paragraph of extracted text in <p> with entity escaping;
/// extract_text of the result reproduces the text.
std::string render_paragraphs_html(std::string_view text);

}  // namespace tutorstack::kb
