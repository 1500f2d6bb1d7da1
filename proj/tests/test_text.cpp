#include "tmkit/text.hpp"

#include <gtest/gtest.h>

using namespace tmkit::text;

TEST(Utf8, RoundTripPreservesBytes) {
  std::string samples[] = {
      "plain ascii",
      "café naïve Über",
      "中文テスト mixed with latin",
      "emoji-free but astral: \U00020000",
      "",
  };
  for (const auto& s : samples) EXPECT_EQ(encode_utf8(decode_utf8(s)), s);
}

TEST(Utf8, InvalidBytesBecomeReplacementChar) {
  std::string bad = "a\xC3(b";  // truncated two-byte sequence
  std::u32string decoded = decode_utf8(bad);
  ASSERT_EQ(decoded.size(), 4u);
  EXPECT_EQ(decoded[1], kReplacementChar);
  EXPECT_EQ(decoded[2], U'(');

  std::string lone_cont = "x\x80y";
  EXPECT_EQ(decode_utf8(lone_cont)[1], kReplacementChar);
}

TEST(Classifiers, SpaceCoversUnicodeSpaces) {
  for (char32_t c : {U' ', U'\t', U'\n', U'\r', char32_t(0x00A0), char32_t(0x2003),
                     char32_t(0x3000)})
    EXPECT_TRUE(is_space(c)) << uint32_t(c);
  for (char32_t c : {U'a', U'0', U'.', char32_t(0x4E2D)}) EXPECT_FALSE(is_space(c));
}

TEST(Classifiers, LetterAndDigit) {
  EXPECT_TRUE(is_letter(U'q'));
  EXPECT_TRUE(is_letter(U'Z'));
  EXPECT_TRUE(is_letter(U'é'));   // é
  EXPECT_TRUE(is_letter(U'ß'));   // ß
  EXPECT_TRUE(is_letter(U'α'));   // alpha
  EXPECT_TRUE(is_letter(U'д'));   // Cyrillic de
  EXPECT_TRUE(is_letter(U'中'));   // Han
  EXPECT_TRUE(is_letter(U'あ'));   // hiragana a
  EXPECT_FALSE(is_letter(U'7'));
  EXPECT_FALSE(is_letter(U'-'));
  EXPECT_FALSE(is_letter(U'×'));  // multiplication sign sits inside Latin-1 letters
  EXPECT_FALSE(is_letter(U'÷'));

  EXPECT_TRUE(is_digit(U'0'));
  EXPECT_TRUE(is_digit(U'9'));
  EXPECT_FALSE(is_digit(U'٠'));  // Arabic-Indic digits are out of scope

  EXPECT_TRUE(is_alnum(U'a'));
  EXPECT_TRUE(is_alnum(U'5'));
  EXPECT_FALSE(is_alnum(U'!'));
}

TEST(Classifiers, HanRanges) {
  EXPECT_TRUE(is_han(U'中'));
  EXPECT_TRUE(is_han(U'㐀'));
  EXPECT_TRUE(is_han(char32_t(0x20000)));
  EXPECT_FALSE(is_han(U'あ'));  // kana is not han
  EXPECT_FALSE(is_han(U'a'));
}

TEST(Classifiers, LowercaseMatchesBicameralCase) {
  EXPECT_TRUE(is_lower(U'a'));
  EXPECT_TRUE(is_lower(U'é'));
  EXPECT_TRUE(is_lower(U'ß'));   // ß has no uppercase mapping but is lowercase
  EXPECT_TRUE(is_lower(U'α'));
  EXPECT_TRUE(is_lower(U'д'));
  EXPECT_FALSE(is_lower(U'A'));
  EXPECT_FALSE(is_lower(U'É'));
  EXPECT_FALSE(is_lower(U'Δ'));  // Delta
  EXPECT_FALSE(is_lower(U'Д'));  // Cyrillic De
  EXPECT_FALSE(is_lower(U'中'));  // unicameral scripts are not lowercase
  EXPECT_FALSE(is_lower(U'あ'));
  EXPECT_FALSE(is_lower(U'5'));
  EXPECT_FALSE(is_lower(U'-'));
}

TEST(Classifiers, FoldCase) {
  EXPECT_EQ(fold_case(U'A'), U'a');
  EXPECT_EQ(fold_case(U'z'), U'z');
  EXPECT_EQ(fold_case(U'É'), U'é');
  EXPECT_EQ(fold_case(U'Δ'), U'δ');
  EXPECT_EQ(fold_case(U'Д'), U'д');
  EXPECT_EQ(fold_case(U'中'), U'中');  // caseless scripts are fixed points
  EXPECT_EQ(fold_case(U'7'), U'7');
  EXPECT_EQ(encode_utf8(fold_case(decode_utf8("Grand ÉCRAN"))), "grand écran");
}

TEST(Entities, FiveXmlEntitiesUnescape) {
  EXPECT_EQ(unescape_entities("a &amp; b"), "a & b");
  EXPECT_EQ(unescape_entities("&lt;tag&gt;"), "<tag>");
  EXPECT_EQ(unescape_entities("&quot;x&quot;"), "\"x\"");
  EXPECT_EQ(unescape_entities("it&apos;s"), "it's");
  EXPECT_EQ(unescape_entities("&amp;amp;"), "&amp;");  // one pass only
  EXPECT_EQ(unescape_entities("&unknown; stays"), "&unknown; stays");
  EXPECT_EQ(unescape_entities("no entities"), "no entities");
}

TEST(Whitespace, CollapseTrimsAndSquashes) {
  EXPECT_EQ(collapse_whitespace("  a \t b  c  "), "a b c");
  EXPECT_EQ(collapse_whitespace("one"), "one");
  EXPECT_EQ(collapse_whitespace("   "), "");
  EXPECT_EQ(collapse_whitespace(""), "");
  EXPECT_EQ(collapse_whitespace("a\n\nb"), "a b");
}

TEST(Whitespace, SplitAndCount) {
  auto toks = split_whitespace("  the 　 quick\tfox ");
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[0], "the");
  EXPECT_EQ(toks[2], "fox");
  EXPECT_TRUE(split_whitespace("   ").empty());
  EXPECT_EQ(count_whitespace_tokens("a b  c"), 3u);
  EXPECT_EQ(count_whitespace_tokens(""), 0u);
  EXPECT_EQ(count_whitespace_tokens("  x  "), 1u);
}

TEST(Whitespace, LowercaseUtf8) {
  EXPECT_EQ(lowercase_utf8("MiXeD ÉtÉ"), "mixed été");
}
