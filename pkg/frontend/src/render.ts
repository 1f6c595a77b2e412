/**
 * Markdown rendering with $-delimited math support.
 *
 * Math segments are lifted out before the markdown pass and typeset with
 * KaTeX afterwards, so underscores and asterisks inside formulas never get
 * mangled by emphasis rules. Malformed math degrades to its source text;
 * rendering never throws.
 */

import DOMPurify from 'dompurify';
import katex from 'katex';
import { marked } from 'marked';

// Placeholder delimiter for lifted math. U+FFFC is not typeable, and any
// pre-existing occurrence in the input is stripped first, so a placeholder
// can never collide with user text.
const SLOT = '￼';

interface MathSegment {
  src: string;
  display: boolean;
}

// $$...$$ may span lines; $...$ must stay on one line and be non-empty.
// A backslash before the opening delimiter escapes it.
const MATH_RE = /(?<!\\)\$\$([\s\S]+?)(?<!\\)\$\$|(?<!\\)\$([^$\n]+?)(?<!\\)\$/g;

function extractMath(text: string): { text: string; segments: MathSegment[] } {
  const segments: MathSegment[] = [];
  const replaced = text.replace(MATH_RE, (_m, display: string | undefined, inline: string | undefined) => {
    const src = display !== undefined ? display : (inline as string);
    segments.push({ src, display: display !== undefined });
    return `${SLOT}${segments.length - 1}${SLOT}`;
  });
  return { text: replaced, segments };
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;');
}

function typeset(segment: MathSegment): string {
  try {
    return katex.renderToString(segment.src, {
      throwOnError: false,
      displayMode: segment.display,
    });
  } catch {
    const wrap = segment.display ? '$$' : '$';
    return escapeHtml(`${wrap}${segment.src}${wrap}`);
  }
}

/**
 * Render markdown with embedded $ / $$ math to sanitized HTML.
 *
 * Unbalanced dollar signs are left as literal text, and a KaTeX parse
 * failure falls back to the original source, so arbitrary drafts always
 * produce something displayable.
 */
export function renderRichText(source: string): string {
  if (!source) return '';
  const { text, segments } = extractMath(source.replace(new RegExp(SLOT, 'g'), ''));
  let html: string;
  try {
    html = marked.parse(text, { async: false, gfm: true });
  } catch {
    html = `<p>${escapeHtml(text)}</p>`;
  }
  const clean = DOMPurify.sanitize(html);
  return clean.replace(new RegExp(`${SLOT}(\\d+)${SLOT}`, 'g'), (match, idx: string) => {
    const segment = segments[Number(idx)];
    return segment === undefined ? match : typeset(segment);
  });
}

/** Render into an element, replacing previous content. */
export function renderInto(el: HTMLElement, source: string): void {
  el.innerHTML = renderRichText(source);
}
