/**
 * Draft and session persistence on top of the Storage interface.
 *
 * Drafts are keyed per problem so switching problems or reloading the page
 * never loses typed text. Corrupt entries read as absent rather than
 * throwing, so a bad value can never wedge startup.
 */

import type { SessionInfo } from './api';

const PREFIX = 'proofgrader.';

function draftKey(problemId: string): string {
  return `${PREFIX}draft.${problemId}`;
}

export function saveDraft(storage: Storage, problemId: string, text: string): void {
  if (text) {
    storage.setItem(draftKey(problemId), text);
  } else {
    storage.removeItem(draftKey(problemId));
  }
}

export function loadDraft(storage: Storage, problemId: string): string {
  return storage.getItem(draftKey(problemId)) ?? '';
}

export function clearDraft(storage: Storage, problemId: string): void {
  storage.removeItem(draftKey(problemId));
}

export function saveSession(storage: Storage, session: SessionInfo): void {
  storage.setItem(`${PREFIX}session`, JSON.stringify(session));
}

export function loadSession(storage: Storage): SessionInfo | null {
  const raw = storage.getItem(`${PREFIX}session`);
  if (raw === null) return null;
  try {
    const parsed = JSON.parse(raw);
    if (typeof parsed?.student_id === 'string' && typeof parsed?.group === 'string') {
      return parsed as SessionInfo;
    }
  } catch {
    // fall through to null
  }
  return null;
}

export function clearSession(storage: Storage): void {
  storage.removeItem(`${PREFIX}session`);
}
