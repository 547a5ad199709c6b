export function showBanner(el: HTMLElement, message: string): void {
  el.textContent = message;
  el.hidden = false;
}

export function clearBanner(el: HTMLElement): void {
  el.textContent = "";
  el.hidden = true;
}
