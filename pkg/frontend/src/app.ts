/**
 * Revise-and-resubmit proof editor.
 *
 * One page per student: pick a problem, type markdown with $ math, watch
 * the debounced preview, then Save & Grade. What the feedback panel shows
 * depends on the group the server assigned: treatment groups get a score,
 * a band message, and the revealed rubric sentences; the SelfEval group
 * gets the rubric checklist and nothing else. All verdicts come from the
 * server; nothing is graded locally.
 */

import type {
  AttemptResponse,
  HistoryResponse,
  ProblemSummary,
  SessionInfo,
} from './api';
import { ApiError } from './api';
import { renderInto } from './render';
import {
  loadDraft,
  loadSession,
  saveDraft,
  saveSession,
} from './storage';

export interface ApiLike {
  listProblems(): Promise<ProblemSummary[]>;
  createSession(studentId: string, rosterGroup?: string): Promise<SessionInfo>;
  submitAttempt(problemId: string, studentId: string, bodyMarkdown: string): Promise<AttemptResponse>;
  attemptHistory(studentId: string): Promise<HistoryResponse>;
}

export interface AppOptions {
  root: HTMLElement;
  api: ApiLike;
  storage?: Storage;
  previewDelayMs?: number;
}

export const PREVIEW_DELAY_MS = 300;

const TEMPLATE = `
<header class="app-header">
  <h1>Proof practice</h1>
  <div class="session-box">
    <form data-testid="session-form" class="session-form">
      <input name="student-id" data-testid="student-id" placeholder="Student id" autocomplete="off" />
      <button type="submit">Start session</button>
    </form>
    <span class="session-banner" data-testid="session-banner" hidden></span>
  </div>
</header>
<nav class="problem-tabs" data-testid="problem-tabs"></nav>
<section class="statement" data-testid="statement"></section>
<main class="workspace">
  <div class="pane editor-pane">
    <label class="pane-label" for="proof-editor">Your proof (markdown)</label>
    <textarea id="proof-editor" data-testid="editor" spellcheck="false"
      placeholder="Write your induction proof here. Use $...$ for math."></textarea>
    <div class="actions">
      <button type="button" data-testid="submit" disabled>Save &amp; Grade</button>
      <button type="button" data-testid="retry" hidden>Retry</button>
      <span class="status" data-testid="status" role="status"></span>
    </div>
  </div>
  <div class="pane preview-pane">
    <span class="pane-label">Preview</span>
    <div class="preview" data-testid="preview"></div>
  </div>
</main>
<section class="feedback" data-testid="feedback" hidden></section>
<section class="history" data-testid="history" hidden>
  <h2>Your attempts</h2>
  <ol data-testid="history-list" class="history-list"></ol>
</section>
`;

export class GradingApp {
  private readonly root: HTMLElement;
  private readonly api: ApiLike;
  private readonly storage: Storage;
  private readonly previewDelayMs: number;

  private problems: ProblemSummary[] = [];
  private session: SessionInfo | null = null;
  private currentProblemId: string | null = null;
  private submitting = false;
  private previewTimer: ReturnType<typeof setTimeout> | null = null;
  private lastFeedback = new Map<string, AttemptResponse>();

  private editor!: HTMLTextAreaElement;
  private preview!: HTMLElement;
  private statement!: HTMLElement;
  private tabs!: HTMLElement;
  private submitButton!: HTMLButtonElement;
  private retryButton!: HTMLButtonElement;
  private status!: HTMLElement;
  private feedbackPanel!: HTMLElement;
  private historySection!: HTMLElement;
  private historyList!: HTMLElement;
  private sessionForm!: HTMLFormElement;
  private sessionBanner!: HTMLElement;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.api = options.api;
    this.storage = options.storage ?? window.localStorage;
    this.previewDelayMs = options.previewDelayMs ?? PREVIEW_DELAY_MS;
  }

  async start(): Promise<void> {
    this.problems = await this.api.listProblems();
    this.buildSkeleton();
    const first = this.problems[0];
    if (first !== undefined) this.selectProblem(first.problem_id);
    await this.restoreSession();
  }

  private buildSkeleton(): void {
    this.root.innerHTML = TEMPLATE;
    const pick = <T extends HTMLElement>(testId: string): T => {
      const el = this.root.querySelector(`[data-testid="${testId}"]`);
      if (el === null) throw new Error(`missing element ${testId}`);
      return el as T;
    };
    this.editor = pick<HTMLTextAreaElement>('editor');
    this.preview = pick('preview');
    this.statement = pick('statement');
    this.tabs = pick('problem-tabs');
    this.submitButton = pick<HTMLButtonElement>('submit');
    this.retryButton = pick<HTMLButtonElement>('retry');
    this.status = pick('status');
    this.feedbackPanel = pick('feedback');
    this.historySection = pick('history');
    this.historyList = pick('history-list');
    this.sessionForm = pick<HTMLFormElement>('session-form');
    this.sessionBanner = pick('session-banner');

    for (const problem of this.problems) {
      const tab = document.createElement('button');
      tab.type = 'button';
      tab.className = 'problem-tab';
      tab.dataset.problemId = problem.problem_id;
      tab.textContent = problem.problem_id;
      tab.addEventListener('click', () => this.selectProblem(problem.problem_id));
      this.tabs.appendChild(tab);
    }

    this.editor.addEventListener('input', () => this.onEditorInput());
    this.submitButton.addEventListener('click', () => void this.submit());
    this.retryButton.addEventListener('click', () => {
      this.retryButton.hidden = true;
      void this.submit();
    });
    this.sessionForm.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = this.sessionForm.querySelector<HTMLInputElement>('[data-testid="student-id"]');
      const studentId = input?.value.trim() ?? '';
      if (studentId) void this.startSession(studentId);
    });
  }

  private async restoreSession(): Promise<void> {
    const stored = loadSession(this.storage);
    if (stored === null) return;
    this.setSession(stored);
    // Re-announce so a restarted server (which only knows students present
    // in its log) accepts submissions again; keep the stored session if the
    // service is unreachable right now.
    try {
      this.setSession(await this.api.createSession(stored.student_id));
      await this.refreshHistory();
    } catch {
      // offline start; the next submit surfaces any real problem
    }
  }

  private async startSession(studentId: string): Promise<void> {
    this.status.textContent = '';
    try {
      const session = await this.api.createSession(studentId);
      this.setSession(session);
      await this.refreshHistory();
    } catch (err) {
      this.status.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  private setSession(session: SessionInfo): void {
    this.session = session;
    saveSession(this.storage, session);
    this.sessionForm.hidden = true;
    this.sessionBanner.hidden = false;
    this.sessionBanner.textContent = `${session.student_id} (${session.group} group)`;
    this.historySection.hidden = false;
    this.updateSubmitEnabled();
  }

  private selectProblem(problemId: string): void {
    const problem = this.problems.find((p) => p.problem_id === problemId);
    if (problem === undefined) return;
    this.currentProblemId = problemId;
    for (const tab of this.tabs.querySelectorAll<HTMLButtonElement>('.problem-tab')) {
      tab.classList.toggle('active', tab.dataset.problemId === problemId);
    }
    renderInto(this.statement, problem.statement_markdown);
    this.editor.value = loadDraft(this.storage, problemId);
    this.flushPreview();
    const last = this.lastFeedback.get(problemId);
    if (last !== undefined) {
      this.renderFeedback(last);
    } else {
      this.feedbackPanel.hidden = true;
    }
    this.updateSubmitEnabled();
  }

  private updateSubmitEnabled(): void {
    this.submitButton.disabled =
      this.submitting || this.session === null || this.currentProblemId === null;
  }

  private onEditorInput(): void {
    if (this.currentProblemId !== null) {
      saveDraft(this.storage, this.currentProblemId, this.editor.value);
    }
    if (this.previewTimer !== null) clearTimeout(this.previewTimer);
    this.previewTimer = setTimeout(() => this.flushPreview(), this.previewDelayMs);
  }

  private flushPreview(): void {
    if (this.previewTimer !== null) {
      clearTimeout(this.previewTimer);
      this.previewTimer = null;
    }
    renderInto(this.preview, this.editor.value);
  }

  private async submit(): Promise<void> {
    if (this.submitting || this.session === null || this.currentProblemId === null) return;
    this.submitting = true;
    this.updateSubmitEnabled();
    this.retryButton.hidden = true;
    this.status.textContent = 'Grading...';
    this.flushPreview();
    try {
      const response = await this.api.submitAttempt(
        this.currentProblemId,
        this.session.student_id,
        this.editor.value,
      );
      this.lastFeedback.set(this.currentProblemId, response);
      this.renderFeedback(response);
      this.status.textContent = '';
      try {
        await this.refreshHistory();
      } catch {
        // feedback already shown; history refresh can wait for the next attempt
      }
    } catch (err) {
      if (err instanceof ApiError && err.transient) {
        this.status.textContent =
          'Grading service is temporarily unavailable. Your draft is saved; try again shortly.';
        this.retryButton.hidden = false;
      } else {
        this.status.textContent = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.submitting = false;
      this.updateSubmitEnabled();
    }
  }

  private renderFeedback(response: AttemptResponse): void {
    const panel = this.feedbackPanel;
    panel.hidden = false;
    panel.textContent = '';
    delete panel.dataset.state;

    const feedback = response.feedback;
    if (feedback.checklist !== undefined) {
      // SelfEval: the checklist for self-assessment, no score, no verdicts.
      const intro = document.createElement('p');
      intro.className = 'selfeval-intro';
      intro.textContent = 'Check your proof against each point below:';
      panel.appendChild(intro);
      const list = document.createElement('ul');
      list.className = 'checklist';
      list.dataset.testid = 'checklist';
      for (const item of feedback.checklist) {
        const li = document.createElement('li');
        const label = document.createElement('label');
        const box = document.createElement('input');
        box.type = 'checkbox';
        label.appendChild(box);
        label.appendChild(document.createTextNode(' ' + item));
        li.appendChild(label);
        list.appendChild(li);
      }
      panel.appendChild(list);
      return;
    }

    if (response.score_percent !== undefined) {
      if (response.score_percent === 100) panel.dataset.state = 'perfect';
      const score = document.createElement('div');
      score.className = 'score-line';
      score.dataset.testid = 'score';
      score.textContent = `Score: ${response.score_percent.toFixed(1)}%`;
      panel.appendChild(score);
    }
    if (response.empty_body) {
      const note = document.createElement('p');
      note.className = 'empty-note';
      note.dataset.testid = 'empty-note';
      note.textContent = 'Your submission was empty, so every rubric point scored 0.';
      panel.appendChild(note);
    }
    if (feedback.general_message) {
      const message = document.createElement('p');
      message.className = 'general-message';
      message.dataset.testid = 'general-message';
      message.textContent = feedback.general_message;
      panel.appendChild(message);
    }
    if (feedback.revealed !== undefined && feedback.revealed.length > 0) {
      const revealed = document.createElement('div');
      revealed.className = 'revealed';
      revealed.dataset.testid = 'revealed';
      for (const point of feedback.revealed) {
        // textContent keeps the server's sentence verbatim.
        const sentence = document.createElement('p');
        sentence.className = 'failure-sentence';
        sentence.textContent = point.failure_sentence;
        revealed.appendChild(sentence);
      }
      panel.appendChild(revealed);
    }
  }

  private async refreshHistory(): Promise<void> {
    if (this.session === null) return;
    const history = await this.api.attemptHistory(this.session.student_id);
    this.historyList.textContent = '';
    for (const item of history.attempts) {
      const li = document.createElement('li');
      const score =
        item.score_percent === undefined || item.score_percent === null
          ? 'submitted'
          : `${item.score_percent.toFixed(1)}%`;
      li.textContent = `${item.problem_id} attempt ${item.attempt_index}: ${score}`;
      this.historyList.appendChild(li);
    }
  }
}

export async function mountApp(options: AppOptions): Promise<GradingApp> {
  const app = new GradingApp(options);
  await app.start();
  return app;
}
